//! Fixed-column PDB reader and writer. Only the first model is read.

use super::{AtomRecord, Builder, Structure, StructureError};
use crate::geometry::Vec3;
use std::fmt::Write;

fn col(line: &str, start: usize, end: usize) -> &str {
    // 1-based inclusive columns; short lines yield "".
    let start = start - 1;
    if start >= line.len() {
        return "";
    }
    line.get(start..end.min(line.len())).unwrap_or("")
}

fn parse_f64(line: &str, lineno: usize, start: usize, end: usize, what: &str) -> Result<f64, StructureError> {
    let s = col(line, start, end).trim();
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| StructureError::Parse {
        line: lineno,
        message: format!("invalid {what}"),
        context: line.to_string(),
    })
}

pub fn parse_pdb(text: &str) -> Result<Structure, StructureError> {
    let mut builder = Builder::default();
    let mut id = String::new();
    let mut resolution = None;
    let mut method = None;
    let mut seen_model = false;

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let rec = col(line, 1, 6).trim_end();
        match rec {
            "HEADER" => id = col(line, 63, 66).trim().to_string(),
            "EXPDTA" => method = Some(col(line, 11, 80).trim().to_string()).filter(|m| !m.is_empty()),
            "REMARK" if col(line, 8, 10).trim() == "2" && line.contains("RESOLUTION.") => {
                resolution = line
                    .split("RESOLUTION.")
                    .nth(1)
                    .and_then(|rest| rest.split_whitespace().next())
                    .and_then(|t| t.parse::<f64>().ok())
                    .filter(|r| r.is_finite());
            }
            "MODEL" => {
                if seen_model {
                    break;
                }
                seen_model = true;
            }
            "ENDMDL" => break,
            "ATOM" | "HETATM" => {
                if line.len() < 54 {
                    return Err(StructureError::Parse {
                        line: lineno,
                        message: "truncated atom record".into(),
                        context: line.to_string(),
                    });
                }
                let seq_id = col(line, 23, 26).trim().parse::<i32>().map_err(|_| StructureError::Parse {
                    line: lineno,
                    message: "invalid residue number".into(),
                    context: line.to_string(),
                })?;
                let pos = Vec3::new(
                    parse_f64(line, lineno, 31, 38, "x coordinate")?,
                    parse_f64(line, lineno, 39, 46, "y coordinate")?,
                    parse_f64(line, lineno, 47, 54, "z coordinate")?,
                );
                let occupancy = match col(line, 55, 60).trim() {
                    "" => 1.0,
                    _ => parse_f64(line, lineno, 55, 60, "occupancy")?,
                };
                let name = col(line, 13, 16).trim();
                if name.is_empty() {
                    return Err(StructureError::Parse {
                        line: lineno,
                        message: "empty atom name".into(),
                        context: line.to_string(),
                    });
                }
                let insertion = col(line, 27, 27).chars().next().filter(|c| !c.is_whitespace());
                let chain = col(line, 22, 22).trim();
                builder.push(AtomRecord {
                    hetatm: rec == "HETATM",
                    name,
                    element: col(line, 77, 78),
                    res_name: col(line, 18, 20),
                    chain: if chain.is_empty() { "A" } else { chain },
                    seq_id,
                    insertion,
                    pos,
                    occupancy,
                });
            }
            _ => {}
        }
    }
    builder.finish(id, resolution, method)
}

fn atom_name_field(name: &str, element: &str) -> String {
    // Single-letter elements start in column 14 unless the name fills 4 columns.
    if name.len() < 4 && element.len() == 1 {
        format!(" {name:<3}")
    } else {
        format!("{name:<4}")
    }
}

/// Serializes resolved atoms as fixed-column PDB. Coordinates carry three
/// decimals, so structures parsed from PDB round-trip exactly.
pub fn write_pdb(s: &Structure) -> String {
    let mut out = String::new();
    if !s.id.is_empty() {
        let _ = writeln!(out, "HEADER    {:<52}{:<4}", "", s.id);
    }
    if let Some(m) = &s.method {
        let _ = writeln!(out, "EXPDTA    {m}");
    }
    if let Some(r) = s.resolution {
        let _ = writeln!(out, "REMARK   2 RESOLUTION.    {r:.2} ANGSTROMS.");
    }
    let mut serial = 1;
    for chain in &s.chains {
        for res in &chain.residues {
            let het = crate::residue::is_modified_polymer(&res.name);
            for atom in res.atoms.iter().filter(|a| a.resolved) {
                let _ = writeln!(
                    out,
                    "{:<6}{:>5} {} {:>3} {:1}{:>4}{:1}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
                    if het { "HETATM" } else { "ATOM" },
                    serial % 100000,
                    atom_name_field(&atom.name, &atom.element),
                    res.name,
                    chain.id,
                    res.seq_id,
                    res.insertion.unwrap_or(' '),
                    atom.pos.x,
                    atom.pos.y,
                    atom.pos.z,
                    1.0,
                    0.0,
                    atom.element,
                );
                serial += 1;
            }
        }
        let _ = writeln!(out, "TER");
    }
    out.push_str("END\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::AminoAcid;

    const TWO_RES: &str = "\
HEADER    TEST                                                1ABC
ATOM      1  N   ALA A   1      11.104   6.134  -6.504  1.00  0.00           N
ATOM      2  CA  ALA A   1      11.639   6.071  -5.147  1.00  0.00           C
ATOM      3  C   ALA A   1      13.149   5.990  -5.186  1.00  0.00           C
ATOM      4  O   ALA A   1      13.739   5.550  -6.168  1.00  0.00           O
ATOM      5  CB  ALA A   1      11.169   4.877  -4.333  1.00  0.00           C
ATOM      6  H   ALA A   1      10.500   6.900  -6.700  1.00  0.00           H
ATOM      7  N   GLY A   2      13.760   6.420  -4.090  1.00  0.00           N
ATOM      8  CA  GLY A   2      15.210   6.400  -3.970  1.00  0.00           C
ATOM      9  C   GLY A   2      15.700   7.800  -3.620  1.00  0.00           C
ATOM     10  O   GLY A   2      15.000   8.800  -3.800  1.00  0.00           O
HETATM   11  O   HOH A 101      20.000  20.000  20.000  1.00  0.00           O
END
";

    #[test]
    fn parses_minimal_fixture() {
        let s = parse_pdb(TWO_RES).unwrap();
        assert_eq!(s.id, "1ABC");
        assert_eq!(s.chains.len(), 1);
        let c = &s.chains[0];
        assert_eq!(c.len(), 2);
        assert_eq!(c.residues[0].aa, AminoAcid::Ala);
        assert_eq!(c.residues[0].atoms.len(), 5, "hydrogen dropped");
        assert_eq!(c.residues[1].aa, AminoAcid::Gly);
        s.check_invariants().unwrap();
    }

    #[test]
    fn altloc_keeps_highest_occupancy() {
        let text = "\
ATOM      1  N   SER A   1       0.000   0.000   0.000  1.00  0.00           N
ATOM      2  CA  SER A   1       1.458   0.000   0.000  1.00  0.00           C
ATOM      3  OG ASER A   1       1.000   1.000   1.000  0.40  0.00           O
ATOM      4  OG BSER A   1       2.000   2.000   2.000  0.60  0.00           O
ATOM      5  CB ASER A   1       3.000   0.000   0.000  0.50  0.00           C
ATOM      6  CB BSER A   1       4.000   0.000   0.000  0.50  0.00           C
";
        let s = parse_pdb(text).unwrap();
        let r = &s.chains[0].residues[0];
        assert_eq!(r.atoms.len(), 4);
        assert_eq!(r.pos("OG").unwrap(), Vec3::new(2.0, 2.0, 2.0));
        // Equal occupancy: first seen.
        assert_eq!(r.pos("CB").unwrap(), Vec3::new(3.0, 0.0, 0.0));
    }

    #[test]
    fn malformed_coordinate_reports_line() {
        let text = "ATOM      1  N   ALA A   1      11.104   abcde  -6.504  1.00  0.00           N\n";
        match parse_pdb(text) {
            Err(StructureError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ligand_only_file_is_empty() {
        let text = "HETATM    1  O   HOH A 101      20.000  20.000  20.000  1.00  0.00           O\n";
        assert_eq!(parse_pdb(text), Err(StructureError::Empty));
    }

    #[test]
    fn first_model_only_and_mse_kept() {
        let text = "\
MODEL        1
HETATM    1  N   MSE A   1       0.000   0.000   0.000  1.00  0.00           N
HETATM    2 SE   MSE A   1       1.000   0.000   0.000  1.00  0.00          SE
ENDMDL
MODEL        2
ATOM      3  N   ALA B   1       0.000   0.000   0.000  1.00  0.00           N
ENDMDL
";
        let s = parse_pdb(text).unwrap();
        assert_eq!(s.chains.len(), 1);
        assert_eq!(s.chains[0].residues[0].aa, AminoAcid::Met);
        assert_eq!(s.chains[0].residues[0].atoms[1].element, "SE");
    }

    #[test]
    fn insertion_codes_sort_after_number() {
        let text = "\
ATOM      1  CA  ALA A  11       0.000   0.000   0.000  1.00  0.00           C
ATOM      2  CA  GLY A  10B      1.000   0.000   0.000  1.00  0.00           C
ATOM      3  CA  SER A  10A      2.000   0.000   0.000  1.00  0.00           C
ATOM      4  CA  THR A  10       3.000   0.000   0.000  1.00  0.00           C
";
        let s = parse_pdb(text).unwrap();
        assert_eq!(s.chains[0].sequence(), "TSGA");
        s.check_invariants().unwrap();
    }

    #[test]
    fn round_trip() {
        let s = parse_pdb(TWO_RES).unwrap();
        let again = parse_pdb(&write_pdb(&s)).unwrap();
        assert_eq!(s, again);
    }
}
