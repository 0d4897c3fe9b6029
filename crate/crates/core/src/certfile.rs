//! Certificate files: a line-oriented text format for facial-reduction chains.
//!
//! ```text
//! facred-cert v1
//! * name: example
//! sizes 3 -2
//! steps 2
//! y 1
//! 1 1 1 0.5
//! 2 2 2 1
//! face 1
//! 1 basis 1
//! 1 0 0
//! 2 support 1 2
//! x 0.25 -1
//! end
//! ```
//!
//! `sizes` lists the blocks as in SDPA (negative for orthant blocks). Each
//! `y i` section holds the nonzero entries of `y_i` as `block row col value`
//! (1-based, `row ≤ col`, orthant entries with `row = col`). Face sections are
//! optional; when every step has one, they are the claimed faces `F_1 … F_t`,
//! otherwise the faces are recomputed from the certificates on load. A PSD face
//! is given by its rank followed by one line per basis column; an orthant face
//! by its support. `x` is the optional strictly feasible point. Lines starting
//! with `*` are comments; the name comment is kept.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::ParseError;
use crate::faces::{BlockFace, FaceRep};
use crate::fra::ReductionCertificate;
use crate::model::{BlockValue, ConeBlock, ConicProgram, YElement};

pub const CERT_HEADER: &str = "facred-cert v1";

const NAME_PREFIX: &str = "* name:";

/// Contents of a certificate file.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateFile {
    pub name: Option<String>,
    pub blocks: Vec<ConeBlock>,
    /// `y_1, …, y_t`.
    pub ys: Vec<YElement>,
    /// Claimed `F_1, …, F_t`; empty when the file gives none.
    pub faces: Vec<FaceRep>,
    pub x_strict: Option<DVector<f64>>,
}

impl CertificateFile {
    pub fn from_certificate(
        name: Option<&str>,
        blocks: &[ConeBlock],
        cert: &ReductionCertificate,
    ) -> Self {
        Self {
            name: name.map(str::to_owned),
            blocks: blocks.to_vec(),
            ys: cert.ys.iter().skip(1).cloned().collect(),
            faces: cert.faces.iter().skip(1).cloned().collect(),
            x_strict: cert.x_strict.clone(),
        }
    }

    /// The chain for `p`, with faces recomputed at `rank_tol` when the file
    /// has none.
    pub fn to_certificate(&self, p: &ConicProgram, rank_tol: f64) -> ReductionCertificate {
        let mut cert = if self.faces.len() == self.ys.len() && !self.ys.is_empty() {
            let mut cert = ReductionCertificate::trivial(p);
            for (y, f) in self.ys.iter().zip(&self.faces) {
                let prev = cert.final_face().dim();
                cert.reducing.push(f.dim() < prev);
                cert.ys.push(y.clone());
                cert.faces.push(f.clone());
            }
            cert
        } else {
            ReductionCertificate::from_certificates(p, &self.ys, rank_tol)
        };
        cert.x_strict = self.x_strict.clone();
        cert
    }
}

fn sdpa_size(b: ConeBlock) -> i64 {
    match b {
        ConeBlock::Orthant(n) => -(n as i64),
        ConeBlock::Psd(n) => n as i64,
    }
}

pub fn write_certificate(file: &CertificateFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CERT_HEADER}");
    if let Some(name) = &file.name {
        let _ = writeln!(out, "{NAME_PREFIX} {name}");
    }
    let sizes: Vec<String> = file
        .blocks
        .iter()
        .map(|&b| sdpa_size(b).to_string())
        .collect();
    let _ = writeln!(out, "sizes {}", sizes.join(" "));
    let _ = writeln!(out, "steps {}", file.ys.len());
    for (i, y) in file.ys.iter().enumerate() {
        let _ = writeln!(out, "y {}", i + 1);
        for (k, b) in y.blocks.iter().enumerate() {
            match b {
                BlockValue::Vector(v) => {
                    for (r, &x) in v.iter().enumerate() {
                        if x != 0.0 {
                            let _ = writeln!(out, "{} {} {} {x:?}", k + 1, r + 1, r + 1);
                        }
                    }
                }
                BlockValue::Matrix(m) => {
                    for c in 0..m.ncols() {
                        for r in 0..=c {
                            let x = m[(r, c)];
                            if x != 0.0 {
                                let _ = writeln!(out, "{} {} {} {x:?}", k + 1, r + 1, c + 1);
                            }
                        }
                    }
                }
            }
        }
    }
    for (i, f) in file.faces.iter().enumerate() {
        let _ = writeln!(out, "face {}", i + 1);
        for (k, b) in f.blocks.iter().enumerate() {
            match b {
                BlockFace::Orthant { support, .. } => {
                    let idx: Vec<String> = support.iter().map(|s| (s + 1).to_string()).collect();
                    let sep = if idx.is_empty() { "" } else { " " };
                    let _ = writeln!(out, "{} support{sep}{}", k + 1, idx.join(" "));
                }
                BlockFace::Psd { basis, .. } => {
                    let _ = writeln!(out, "{} basis {}", k + 1, basis.ncols());
                    for col in basis.column_iter() {
                        let vals: Vec<String> = col.iter().map(|x| format!("{x:?}")).collect();
                        let _ = writeln!(out, "{}", vals.join(" "));
                    }
                }
            }
        }
    }
    if let Some(x) = &file.x_strict {
        let vals: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        let sep = if vals.is_empty() { "" } else { " " };
        let _ = writeln!(out, "x{sep}{}", vals.join(" "));
    }
    let _ = writeln!(out, "end");
    out
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn number<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T, ParseError> {
    tok.parse()
        .map_err(|_| syntax(line, format!("bad number {tok:?}")))
}

fn parse_float(line: usize, tok: &str) -> Result<f64, ParseError> {
    let x: f64 = number(line, tok)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(syntax(line, format!("non-finite value {tok:?}")))
    }
}

fn block_index(line: usize, tok: &str, blocks: &[ConeBlock]) -> Result<usize, ParseError> {
    let k: usize = number(line, tok)?;
    if k == 0 || k > blocks.len() {
        return Err(ParseError::OutOfRange {
            line,
            msg: format!("block {k} of {}", blocks.len()),
        });
    }
    Ok(k - 1)
}

enum Section {
    None,
    Y(usize),
    Face(usize),
}

pub fn read_certificate(text: &str) -> Result<CertificateFile, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, l)) if l == CERT_HEADER => {}
        Some((_, l)) => {
            return Err(ParseError::Header(format!(
                "expected {CERT_HEADER:?}, found {l:?}"
            )))
        }
        None => return Err(ParseError::Header("empty file".into())),
    }
    let mut name = None;
    let mut blocks: Option<Vec<ConeBlock>> = None;
    let mut steps: Option<usize> = None;
    let mut ys: Vec<YElement> = Vec::new();
    let mut faces: Vec<Option<FaceRep>> = Vec::new();
    let mut x_strict = None;
    let mut section = Section::None;
    let mut ended = false;
    while let Some((ln, l)) = lines.next() {
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix(NAME_PREFIX) {
            name = Some(rest.trim().to_owned());
            continue;
        }
        if l.starts_with('*') {
            continue;
        }
        if ended {
            return Err(syntax(ln, "content after end"));
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks[0] {
            "sizes" => {
                let parsed = toks[1..]
                    .iter()
                    .map(|t| {
                        let s: i64 = number(ln, t)?;
                        match s {
                            0 => Err(syntax(ln, "zero block size")),
                            s if s < 0 => Ok(ConeBlock::Orthant(s.unsigned_abs() as usize)),
                            s => Ok(ConeBlock::Psd(s as usize)),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if parsed.is_empty() {
                    return Err(syntax(ln, "no blocks"));
                }
                blocks = Some(parsed);
            }
            "steps" => {
                let structure = blocks
                    .as_ref()
                    .ok_or_else(|| syntax(ln, "steps before sizes"))?;
                let t: usize = number(ln, toks.get(1).copied().unwrap_or(""))?;
                ys = vec![YElement::zeros(structure); t];
                faces = vec![None; t];
                steps = Some(t);
            }
            "y" | "face" => {
                let t = steps.ok_or_else(|| syntax(ln, "section before steps"))?;
                let i: usize = number(ln, toks.get(1).copied().unwrap_or(""))?;
                if i == 0 || i > t {
                    return Err(ParseError::OutOfRange {
                        line: ln,
                        msg: format!("step {i} of {t}"),
                    });
                }
                section = if toks[0] == "y" {
                    Section::Y(i - 1)
                } else {
                    let structure = blocks.as_ref().expect("steps follows sizes");
                    faces[i - 1] = Some(FaceRep::full(structure));
                    Section::Face(i - 1)
                };
            }
            "x" => {
                let vals = toks[1..]
                    .iter()
                    .map(|t| parse_float(ln, t))
                    .collect::<Result<Vec<_>, _>>()?;
                x_strict = Some(DVector::from_vec(vals));
                section = Section::None;
            }
            "end" => ended = true,
            _ => {
                let structure = blocks
                    .as_ref()
                    .ok_or_else(|| syntax(ln, "entry before sizes"))?;
                match section {
                    Section::None => return Err(syntax(ln, format!("unexpected {:?}", toks[0]))),
                    Section::Y(i) => {
                        if toks.len() != 4 {
                            return Err(syntax(ln, "expected: block row col value"));
                        }
                        let k = block_index(ln, toks[0], structure)?;
                        let r: usize = number(ln, toks[1])?;
                        let c: usize = number(ln, toks[2])?;
                        let v = parse_float(ln, toks[3])?;
                        let n = structure[k].size();
                        if r == 0 || c == 0 || r > n || c > n {
                            return Err(ParseError::OutOfRange {
                                line: ln,
                                msg: format!("({r}, {c}) in a block of size {n}"),
                            });
                        }
                        match &mut ys[i].blocks[k] {
                            BlockValue::Vector(vec) => {
                                if r != c {
                                    return Err(syntax(
                                        ln,
                                        "off-diagonal entry in an orthant block",
                                    ));
                                }
                                vec[r - 1] = v;
                            }
                            BlockValue::Matrix(m) => {
                                m[(r - 1, c - 1)] = v;
                                m[(c - 1, r - 1)] = v;
                            }
                        }
                    }
                    Section::Face(i) => {
                        let k = block_index(ln, toks[0], structure)?;
                        let face = faces[i].as_mut().expect("face section opened");
                        match (structure[k], toks.get(1).copied()) {
                            (ConeBlock::Orthant(dim), Some("support")) => {
                                let support = toks[2..]
                                    .iter()
                                    .map(|t| {
                                        let s: usize = number(ln, t)?;
                                        if s == 0 || s > dim {
                                            return Err(ParseError::OutOfRange {
                                                line: ln,
                                                msg: format!("support index {s} of {dim}"),
                                            });
                                        }
                                        Ok(s - 1)
                                    })
                                    .collect::<Result<Vec<_>, _>>()?;
                                face.blocks[k] = BlockFace::Orthant { dim, support };
                            }
                            (ConeBlock::Psd(n), Some("basis")) => {
                                let r: usize = number(ln, toks.get(2).copied().unwrap_or(""))?;
                                if r > n {
                                    return Err(ParseError::OutOfRange {
                                        line: ln,
                                        msg: format!("rank {r} in a block of order {n}"),
                                    });
                                }
                                let mut basis = DMatrix::zeros(n, r);
                                for j in 0..r {
                                    let (cl, col) = lines
                                        .next()
                                        .ok_or_else(|| syntax(ln, "missing basis column"))?;
                                    let vals = col
                                        .split_whitespace()
                                        .map(|t| parse_float(cl, t))
                                        .collect::<Result<Vec<_>, _>>()?;
                                    if vals.len() != n {
                                        return Err(syntax(cl, format!("expected {n} values")));
                                    }
                                    basis.set_column(j, &DVector::from_vec(vals));
                                }
                                face.blocks[k] = BlockFace::Psd { n, basis };
                            }
                            _ => {
                                return Err(syntax(
                                    ln,
                                    "expected 'support' or 'basis' for this block",
                                ))
                            }
                        }
                    }
                }
            }
        }
    }
    if !ended {
        return Err(syntax(text.lines().count(), "missing end"));
    }
    let blocks = blocks.ok_or_else(|| ParseError::Header("missing sizes".into()))?;
    if steps.is_none() {
        return Err(ParseError::Header("missing steps".into()));
    }
    let faces = if faces.iter().all(Option::is_some) {
        faces.into_iter().flatten().collect()
    } else if faces.iter().all(Option::is_none) {
        Vec::new()
    } else {
        return Err(ParseError::Header(
            "faces must be given for every step or none".into(),
        ));
    };
    Ok(CertificateFile {
        name,
        blocks,
        ys,
        faces,
        x_strict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::fixtures::{lp_example, lp_example_chain, sdp_example};
    use crate::fra::{run_facial_reduction, verify_certificate_chain, FraOptions};
    use proptest::prelude::*;

    #[test]
    fn computed_chain_round_trips() {
        for p in [lp_example(), sdp_example()] {
            let cert = run_facial_reduction(&p, &FraOptions::default()).unwrap();
            let file = CertificateFile::from_certificate(Some(&p.name), &p.blocks, &cert);
            let text = write_certificate(&file);
            assert!(text.starts_with("facred-cert v1\n"));
            let back = read_certificate(&text).unwrap();
            assert_eq!(back, file);
            assert_eq!(back.to_certificate(&p, 1e-9), cert);
        }
    }

    #[test]
    fn hand_chain_without_faces_recomputes_them() {
        let p = lp_example();
        let text = "facred-cert v1\nsizes -5\nsteps 2\ny 1\n1 4 4 1\n1 5 5 1\ny 2\n1 2 2 1\n1 3 3 1\n1 5 5 -1\nend\n";
        let file = read_certificate(text).unwrap();
        assert!(file.faces.is_empty());
        assert_eq!(file.ys, lp_example_chain());
        let cert = file.to_certificate(&p, 1e-9);
        assert!(verify_certificate_chain(&p, &cert, &Tolerances::default()).passed());
    }

    #[test]
    fn rejects_malformed_files() {
        let bad = [
            "",
            "facred-cert v2\nend\n",
            "facred-cert v1\nsizes 2\nsteps 1\ny 2\nend\n",
            "facred-cert v1\nsizes 2\nsteps 1\ny 1\n1 3 1 1\nend\n",
            "facred-cert v1\nsizes -2\nsteps 1\ny 1\n1 1 2 1\nend\n",
            "facred-cert v1\nsizes 2\nsteps 1\ny 1\n1 1 1 nan\nend\n",
            "facred-cert v1\nsizes 2\nsteps 1\ny 1\n1 1 1 1\n",
            "facred-cert v1\nsizes 2 -1\nsteps 2\nface 1\n1 basis 0\n2 support\nend\n",
        ];
        for text in bad {
            assert!(read_certificate(text).is_err(), "{text:?}");
        }
    }

    fn arb_element(blocks: Vec<ConeBlock>) -> impl Strategy<Value = YElement> {
        let len = |b: &ConeBlock| match *b {
            ConeBlock::Orthant(n) => n,
            ConeBlock::Psd(n) => n * n,
        };
        let dim: usize = blocks.iter().map(len).sum();
        prop::collection::vec(prop_oneof![Just(0.0), -1e3..1e3f64], dim).prop_map(move |v| {
            let mut it = v.into_iter();
            YElement {
                blocks: blocks
                    .iter()
                    .map(|&b| match b {
                        ConeBlock::Orthant(n) => {
                            BlockValue::Vector(DVector::from_iterator(n, it.by_ref().take(n)))
                        }
                        ConeBlock::Psd(n) => {
                            let g = DMatrix::from_iterator(n, n, it.by_ref().take(n * n));
                            BlockValue::Matrix(&g + g.transpose())
                        }
                    })
                    .collect(),
            }
        })
    }

    proptest! {
        #[test]
        fn arbitrary_chains_round_trip(
            ys in prop::collection::vec(arb_element(vec![ConeBlock::Psd(3), ConeBlock::Orthant(2)]), 0..4),
            x in prop::option::of(prop::collection::vec(-1e6..1e6f64, 0..4)),
        ) {
            let file = CertificateFile {
                name: Some("chain".into()),
                blocks: vec![ConeBlock::Psd(3), ConeBlock::Orthant(2)],
                ys,
                faces: Vec::new(),
                x_strict: x.map(DVector::from_vec),
            };
            prop_assert_eq!(read_certificate(&write_certificate(&file)).unwrap(), file);
        }
    }
}
