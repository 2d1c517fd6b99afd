use indexmap::IndexMap;

use super::{MsaBlock, MsaError, MsaRow, PairedMsa, GAP};

/// Species tag from a hit header: a UniProt `OX=<taxid>` field wins, then a
/// mnemonic suffix such as `ABC_HUMAN` on the identifier.
pub fn species_from_header(header: &str) -> Option<String> {
    if let Some(pos) = header.find("OX=") {
        let digits: String = header[pos + 3..].chars().take_while(char::is_ascii_digit).collect();
        if !digits.is_empty() {
            return Some(format!("taxid:{digits}"));
        }
    }
    let id = header.split_whitespace().next()?;
    let last = id.rsplit('|').next()?;
    let (_, code) = last.rsplit_once('_')?;
    let mnemonic = (2..=5).contains(&code.len())
        && code.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
        && code.chars().any(|c| c.is_ascii_uppercase());
    mnemonic.then(|| code.to_string())
}

fn block_from_rows(rows: Vec<MsaRow>) -> Result<MsaBlock, MsaError> {
    let mut it = rows.into_iter();
    let query = it.next().ok_or(MsaError::Empty)?;
    MsaBlock::new(query, it.collect())
}

/// A3M: FASTA-like, lowercase letters and `.` are insertions relative to
/// the query and are dropped.
pub fn parse_a3m(text: &str) -> Result<MsaBlock, MsaError> {
    let mut rows: Vec<MsaRow> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(h) = line.strip_prefix('>') {
            rows.push(MsaRow::new(h.trim(), ""));
            continue;
        }
        let row = rows.last_mut().ok_or(MsaError::Parse { line: ln + 1, msg: "sequence before first header".into() })?;
        for c in line.bytes() {
            match c {
                b'A'..=b'Z' | b'-' => row.seq.push(c),
                b'a'..=b'z' | b'.' => {}
                b'*' => {}
                _ => return Err(MsaError::Parse { line: ln + 1, msg: format!("unexpected character {:?}", c as char) }),
            }
        }
    }
    block_from_rows(rows)
}

/// Stockholm: all columns are kept, `.` gaps become `-` and residues are
/// upper-cased. `#=GS <name> DE` text joins the row header.
pub fn parse_stockholm(text: &str) -> Result<MsaBlock, MsaError> {
    let mut seqs: IndexMap<String, Vec<u8>> = IndexMap::new();
    let mut desc: IndexMap<String, String> = IndexMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with("# STOCKHOLM") {
            continue;
        }
        if line == "//" {
            break;
        }
        if let Some(rest) = line.strip_prefix("#=GS") {
            let mut parts = rest.split_whitespace();
            if let (Some(name), Some("DE")) = (parts.next(), parts.next()) {
                desc.insert(name.to_string(), parts.collect::<Vec<_>>().join(" "));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(seq), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(MsaError::Parse { line: ln + 1, msg: "expected `<name> <aligned sequence>`".into() });
        };
        let buf = seqs.entry(name.to_string()).or_default();
        for c in seq.bytes() {
            match c {
                b'.' | b'-' => buf.push(GAP),
                c if c.is_ascii_alphabetic() => buf.push(c.to_ascii_uppercase()),
                _ => return Err(MsaError::Parse { line: ln + 1, msg: format!("unexpected character {:?}", c as char) }),
            }
        }
    }
    let rows = seqs
        .into_iter()
        .map(|(name, seq)| {
            let header = match desc.get(&name) {
                Some(d) => format!("{name} {d}"),
                None => name,
            };
            let mut row = MsaRow::new(&header, "");
            row.seq = seq;
            row
        })
        .collect();
    block_from_rows(rows)
}

/// A3M with one provenance header per row and a leading `#len1,len2` line.
pub fn write_paired_a3m(p: &PairedMsa) -> String {
    let mut out = format!("#{},{}\n", p.len1, p.len2);
    for (i, r) in p.rows.iter().enumerate() {
        let v = &r.provenance;
        let idx = |x: Option<usize>| x.map_or("-".to_string(), |x| x.to_string());
        out.push_str(&format!(
            ">row{i} src1={} src2={} species={} rank={}\n",
            idx(v.src1),
            idx(v.src2),
            v.species.as_deref().unwrap_or("-"),
            idx(v.rank),
        ));
        out.push_str(std::str::from_utf8(&r.seq).expect("alignment rows are ASCII"));
        out.push('\n');
    }
    out
}
