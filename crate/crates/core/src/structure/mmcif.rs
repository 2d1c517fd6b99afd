//! mmCIF reader: a CIF tokenizer plus the `_atom_site` category loop.

use super::{AtomRecord, Builder, Structure, StructureError};
use crate::geometry::Vec3;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
struct Token {
    text: String,
    line: usize,
    /// Quoted or text-field values are never keywords.
    quoted: bool,
}

fn tokenize(text: &str) -> Result<Vec<Token>, StructureError> {
    let mut tokens = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix(';') {
            // Multi-line text field, closed by a line starting with ';'.
            let mut value = rest.to_string();
            let mut closed = false;
            for (_, l) in lines.by_ref() {
                if l.starts_with(';') {
                    closed = true;
                    break;
                }
                value.push('\n');
                value.push_str(l);
            }
            if !closed {
                return Err(StructureError::Parse {
                    line: lineno,
                    message: "unterminated text field".into(),
                    context: line.to_string(),
                });
            }
            tokens.push(Token { text: value, line: lineno, quoted: true });
            continue;
        }
        let bytes = line.as_bytes();
        let mut p = 0;
        while p < bytes.len() {
            let c = bytes[p];
            if c.is_ascii_whitespace() {
                p += 1;
                continue;
            }
            if c == b'#' {
                break;
            }
            if c == b'\'' || c == b'"' {
                // A quote closes only when followed by whitespace or end of line.
                let mut q = p + 1;
                loop {
                    if q >= bytes.len() {
                        return Err(StructureError::Parse {
                            line: lineno,
                            message: "unterminated quoted value".into(),
                            context: line.to_string(),
                        });
                    }
                    if bytes[q] == c && (q + 1 == bytes.len() || bytes[q + 1].is_ascii_whitespace()) {
                        break;
                    }
                    q += 1;
                }
                tokens.push(Token { text: line[p + 1..q].to_string(), line: lineno, quoted: true });
                p = q + 1;
                continue;
            }
            let start = p;
            while p < bytes.len() && !bytes[p].is_ascii_whitespace() {
                p += 1;
            }
            tokens.push(Token { text: line[start..p].to_string(), line: lineno, quoted: false });
        }
    }
    Ok(tokens)
}

struct Loop {
    tags: Vec<String>,
    rows: Vec<Vec<Token>>,
}

struct Document {
    items: HashMap<String, Token>,
    loops: Vec<Loop>,
}

fn is_keyword(t: &Token) -> bool {
    !t.quoted && (t.text.starts_with('_') || t.text.starts_with("data_") || t.text == "loop_")
}

fn parse_document(tokens: Vec<Token>) -> Result<Document, StructureError> {
    let mut items = HashMap::new();
    let mut loops = Vec::new();
    let mut it = tokens.into_iter().peekable();
    while let Some(tok) = it.next() {
        if tok.quoted {
            return Err(StructureError::Parse {
                line: tok.line,
                message: "value without a tag".into(),
                context: tok.text,
            });
        }
        if tok.text.starts_with("data_") {
            continue;
        }
        if tok.text == "loop_" {
            let mut tags = Vec::new();
            while let Some(t) = it.peek() {
                if !t.quoted && t.text.starts_with('_') {
                    tags.push(it.next().unwrap().text.to_ascii_lowercase());
                } else {
                    break;
                }
            }
            let mut values = Vec::new();
            while let Some(t) = it.peek() {
                if is_keyword(t) {
                    break;
                }
                values.push(it.next().unwrap());
            }
            if tags.is_empty() || values.len() % tags.len() != 0 {
                return Err(StructureError::Parse {
                    line: tok.line,
                    message: format!("loop with {} tags has {} values", tags.len(), values.len()),
                    context: tags.join(" "),
                });
            }
            let rows = values.chunks(tags.len()).map(|c| c.to_vec()).collect();
            loops.push(Loop { tags, rows });
        } else if tok.text.starts_with('_') {
            match it.next() {
                Some(v) if !is_keyword(&v) => {
                    items.insert(tok.text.to_ascii_lowercase(), v);
                }
                _ => {
                    return Err(StructureError::Parse {
                        line: tok.line,
                        message: "tag without a value".into(),
                        context: tok.text,
                    })
                }
            }
        } else {
            return Err(StructureError::Parse {
                line: tok.line,
                message: "unexpected token".into(),
                context: tok.text,
            });
        }
    }
    Ok(Document { items, loops })
}

fn present(v: &str) -> Option<&str> {
    match v {
        "." | "?" => None,
        s => Some(s),
    }
}

pub fn parse_mmcif(text: &str) -> Result<Structure, StructureError> {
    let doc = parse_document(tokenize(text)?)?;
    let item = |k: &str| doc.items.get(k).and_then(|t| present(&t.text)).map(str::to_string);
    let id = item("_entry.id").unwrap_or_default();
    let method = item("_exptl.method");
    let resolution = item("_refine.ls_d_res_high")
        .or_else(|| item("_reflns.d_resolution_high"))
        .or_else(|| item("_em_3d_reconstruction.resolution"))
        .and_then(|r| r.parse::<f64>().ok());

    let atom_site = doc.loops.iter().find(|l| l.tags.iter().any(|t| t.starts_with("_atom_site.")));
    let Some(lp) = atom_site else {
        return Err(StructureError::Empty);
    };
    let idx = |name: &str| lp.tags.iter().position(|t| t == &format!("_atom_site.{name}"));
    let need = |name: &str| {
        idx(name).ok_or_else(|| StructureError::Parse {
            line: 0,
            message: format!("missing _atom_site.{name}"),
            context: String::new(),
        })
    };
    let i_group = idx("group_pdb");
    let i_elem = idx("type_symbol");
    let i_name = idx("auth_atom_id").or(idx("label_atom_id")).ok_or_else(|| StructureError::Parse {
        line: 0,
        message: "missing atom name column".into(),
        context: String::new(),
    })?;
    let i_comp = idx("auth_comp_id").or(idx("label_comp_id")).ok_or_else(|| StructureError::Parse {
        line: 0,
        message: "missing residue name column".into(),
        context: String::new(),
    })?;
    let i_chain = idx("auth_asym_id").or(idx("label_asym_id")).ok_or_else(|| StructureError::Parse {
        line: 0,
        message: "missing chain column".into(),
        context: String::new(),
    })?;
    let i_seq = idx("auth_seq_id").or(idx("label_seq_id")).ok_or_else(|| StructureError::Parse {
        line: 0,
        message: "missing residue number column".into(),
        context: String::new(),
    })?;
    let i_ins = idx("pdbx_pdb_ins_code");
    let (i_x, i_y, i_z) = (need("cartn_x")?, need("cartn_y")?, need("cartn_z")?);
    let i_occ = idx("occupancy");
    let i_model = idx("pdbx_pdb_model_num");

    let mut builder = Builder::default();
    let mut first_model: Option<String> = None;
    for row in &lp.rows {
        if let Some(im) = i_model {
            let m = &row[im].text;
            match &first_model {
                None => first_model = Some(m.clone()),
                Some(f) if f != m => continue,
                _ => {}
            }
        }
        let err = |what: &str, t: &Token| StructureError::Parse {
            line: t.line,
            message: format!("invalid {what}"),
            context: t.text.clone(),
        };
        let num = |i: usize, what: &str| -> Result<f64, StructureError> {
            row[i].text.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(what, &row[i]))
        };
        let pos = Vec3::new(num(i_x, "Cartn_x")?, num(i_y, "Cartn_y")?, num(i_z, "Cartn_z")?);
        let seq_id = row[i_seq].text.parse::<i32>().map_err(|_| err("residue number", &row[i_seq]))?;
        let occupancy = match i_occ.and_then(|i| present(&row[i].text)) {
            Some(_) => num(i_occ.unwrap(), "occupancy")?,
            None => 1.0,
        };
        let insertion = i_ins.and_then(|i| present(&row[i].text)).and_then(|s| s.chars().next());
        builder.push(AtomRecord {
            hetatm: i_group.map(|i| row[i].text == "HETATM").unwrap_or(false),
            name: &row[i_name].text,
            element: i_elem.and_then(|i| present(&row[i].text)).unwrap_or(""),
            res_name: &row[i_comp].text,
            chain: &row[i_chain].text,
            seq_id,
            insertion,
            pos,
            occupancy,
        });
    }
    builder.finish(id, resolution, method)
}
