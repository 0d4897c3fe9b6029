//! SDPA sparse format (`.dat-s`) reader and writer.
//!
//! Sign convention: a file describes the standard SDPA pair
//!
//! ```text
//!     min  sum_i c_i x_i    s.t.  sum_i F_i x_i - F_0  in K
//!     max  <F_0, Y>         s.t.  <F_i, Y> = c_i,  Y in K
//! ```
//!
//! and is read as the program `sup ⟨c,x⟩ s.t. b − Ax ∈ K` with `a_i = F_i`
//! and `b = −F_0`. Under this reading the SDPA dual is our dual with the
//! objective negated, and the SDPA primal variable is `−x`. Writing applies
//! the same map, so third-party SDPA solvers see the intended problem.
//!
//! Negative block sizes denote diagonal blocks and become orthant blocks.
//! Matrix entries may be given in either triangle; each unordered position may
//! appear at most once per matrix and block.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::DVector;

use crate::error::ParseError;
use crate::model::{BlockValue, ConeBlock, ConicProgram, YElement};

const NAME_PREFIX: &str = "* name:";

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (idx, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('"') || t.starts_with('*') {
                continue;
            }
            return Some((idx + 1, t));
        }
        None
    }
}

fn header_numbers(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || "{}(),".contains(c))
        .filter(|t| !t.is_empty())
        .take_while(|t| t.parse::<f64>().is_ok())
        .collect()
}

fn read_header<T: std::str::FromStr>(
    lines: &mut Lines<'_>,
    count: usize,
    what: &str,
) -> Result<Vec<T>, ParseError> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (line_no, line) = lines
            .next_content()
            .ok_or_else(|| ParseError::Header(format!("unexpected end of input reading {what}")))?;
        let toks = header_numbers(line);
        if toks.is_empty() {
            return Err(ParseError::Header(format!(
                "line {line_no}: expected {what}, found {line:?}"
            )));
        }
        for t in toks.into_iter().take(count - out.len()) {
            let v = t.parse::<T>().map_err(|_| {
                ParseError::Header(format!("line {line_no}: cannot parse {t:?} in {what}"))
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Parses SDPA sparse text into a [`ConicProgram`].
pub fn parse_sdpa(text: &str) -> Result<ConicProgram, ParseError> {
    let name = text
        .lines()
        .find_map(|l| l.trim().strip_prefix(NAME_PREFIX))
        .map(|s| s.trim().to_string())
        .unwrap_or_default();

    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let m = read_header::<i64>(&mut lines, 1, "number of constraint matrices")?[0];
    if m < 0 {
        return Err(ParseError::Header(format!("negative m = {m}")));
    }
    let m = m as usize;
    let nblocks = read_header::<i64>(&mut lines, 1, "number of blocks")?[0];
    if nblocks <= 0 {
        return Err(ParseError::Header(format!("number of blocks is {nblocks}")));
    }
    let sizes = read_header::<i64>(&mut lines, nblocks as usize, "block structure")?;
    let blocks = sizes
        .iter()
        .map(|&s| match s {
            0 => Err(ParseError::Header("block of size 0".into())),
            s if s < 0 => Ok(ConeBlock::Orthant(s.unsigned_abs() as usize)),
            s => Ok(ConeBlock::Psd(s as usize)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let c = read_header::<f64>(&mut lines, m, "objective vector")?;

    // mats[0] = F_0, mats[i] = F_i
    let mut mats: Vec<YElement> = (0..=m).map(|_| YElement::zeros(&blocks)).collect();
    let mut seen = HashSet::new();
    while let Some((line_no, line)) = lines.next_content() {
        let toks: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || "{}(),".contains(c))
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() < 5 {
            return Err(ParseError::Syntax {
                line: line_no,
                msg: format!("expected 5 fields, found {}", toks.len()),
            });
        }
        let int = |t: &str| -> Result<usize, ParseError> {
            t.parse::<usize>().map_err(|_| ParseError::Syntax {
                line: line_no,
                msg: format!("bad index {t:?}"),
            })
        };
        let (matno, blk, i, j) = (int(toks[0])?, int(toks[1])?, int(toks[2])?, int(toks[3])?);
        let value = toks[4].parse::<f64>().map_err(|_| ParseError::Syntax {
            line: line_no,
            msg: format!("bad value {:?}", toks[4]),
        })?;
        if matno > m {
            return Err(ParseError::OutOfRange {
                line: line_no,
                msg: format!("matrix number {matno} > m = {m}"),
            });
        }
        if blk == 0 || blk > blocks.len() {
            return Err(ParseError::OutOfRange {
                line: line_no,
                msg: format!("block number {blk} outside 1..={}", blocks.len()),
            });
        }
        let size = blocks[blk - 1].size();
        if i == 0 || j == 0 || i > size || j > size {
            return Err(ParseError::OutOfRange {
                line: line_no,
                msg: format!("position ({i}, {j}) outside block of size {size}"),
            });
        }
        let (lo, hi) = (i.min(j), i.max(j));
        if !seen.insert((matno, blk, lo, hi)) {
            return Err(ParseError::Duplicate {
                line: line_no,
                matno,
                block: blk,
                i: lo,
                j: hi,
            });
        }
        match &mut mats[matno].blocks[blk - 1] {
            BlockValue::Vector(v) => {
                if i != j {
                    return Err(ParseError::OutOfRange {
                        line: line_no,
                        msg: format!("off-diagonal ({i}, {j}) in diagonal block {blk}"),
                    });
                }
                v[i - 1] = value;
            }
            BlockValue::Matrix(a) => {
                a[(lo - 1, hi - 1)] = value;
                a[(hi - 1, lo - 1)] = value;
            }
        }
    }

    let mut it = mats.into_iter();
    let f0 = it.next().expect("F_0 present");
    let a: Vec<YElement> = it.collect();
    Ok(ConicProgram::new(
        name,
        blocks,
        a,
        f0.scaled(-1.0),
        DVector::from_vec(c),
    )?)
}

fn push_entries(out: &mut String, matno: usize, y: &YElement, sign: f64) {
    for (k, b) in y.blocks.iter().enumerate() {
        match b {
            BlockValue::Vector(v) => {
                for (i, &x) in v.iter().enumerate() {
                    if x != 0.0 {
                        let _ =
                            writeln!(out, "{matno} {} {} {} {:?}", k + 1, i + 1, i + 1, sign * x);
                    }
                }
            }
            BlockValue::Matrix(a) => {
                let n = a.nrows();
                for i in 0..n {
                    for j in i..n {
                        let x = a[(i, j)];
                        if x != 0.0 {
                            let _ = writeln!(
                                out,
                                "{matno} {} {} {} {:?}",
                                k + 1,
                                i + 1,
                                j + 1,
                                sign * x
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Writes a program in SDPA sparse format; see the module docs for signs.
pub fn emit_sdpa(p: &ConicProgram) -> String {
    let mut out = String::new();
    if !p.name.is_empty() {
        let _ = writeln!(out, "{NAME_PREFIX} {}", p.name);
    }
    let _ = writeln!(
        out,
        "* F_0 = -b, F_i = a_i; program: sup <c,x> s.t. b - sum x_i a_i in K"
    );
    let _ = writeln!(out, "{}", p.m());
    let _ = writeln!(out, "{}", p.blocks.len());
    let sizes: Vec<String> = p
        .blocks
        .iter()
        .map(|b| match b {
            ConeBlock::Orthant(d) => format!("-{d}"),
            ConeBlock::Psd(n) => n.to_string(),
        })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let cs: Vec<String> = p.c.iter().map(|x| format!("{x:?}")).collect();
    let _ = writeln!(out, "{}", cs.join(" "));
    push_entries(&mut out, 0, &p.b, -1.0);
    for (i, a) in p.a.iter().enumerate() {
        push_entries(&mut out, i + 1, a, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{lp_example, sdp_example};
    use nalgebra::DMatrix;

    fn squash(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn sdp_example_round_trip() {
        let p = sdp_example();
        let text = emit_sdpa(&p);
        let q = parse_sdpa(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(squash(&emit_sdpa(&q)), squash(&text));
    }

    #[test]
    fn sdp_example_hand_encoding() {
        let text = "\
\"sdp example\"
2 =mDIM
1 =nBLOCK
3 =bLOCKsTRUCT
{1, 0}
0 1 1 1 -1
1 1 1 2 1
2 1 1 3 1
2 1 2 2 1
";
        let q = parse_sdpa(text).unwrap();
        let p = sdp_example();
        assert_eq!(q.a, p.a);
        assert_eq!(q.b, p.b);
        assert_eq!(q.c, p.c);
    }

    #[test]
    fn lp_example_round_trip() {
        let p = lp_example();
        let q = parse_sdpa(&emit_sdpa(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn empty_entry_list_gives_zero_data() {
        let text = "1\n2\n2 -3\n0.5\n";
        let p = parse_sdpa(text).unwrap();
        assert_eq!(p.blocks, vec![ConeBlock::Psd(2), ConeBlock::Orthant(3)]);
        assert_eq!(p.a[0].max_abs(), 0.0);
        assert_eq!(p.b.max_abs(), 0.0);
        assert_eq!(p.c.as_slice(), &[0.5]);
    }

    #[test]
    fn mixed_blocks_sample() {
        // Layout of the classic mixed-block sample shipped with SDPA.
        let text = "\
\"Example 2: mDim = 5, nBLOCK = 3, {2,3,-2}\"
   5  =  mDIM
   3  =  nBOLCK
   (2, 3, -2)  = bLOCKsTRUCT
{1.1, -10, 6.6, 19, 4.1}
0 1 1 1 -1.4
0 1 1 2 -3.2
0 1 2 2 -2.8
0 2 1 1 15
0 2 1 2 -12
0 2 1 3 2.1
0 2 2 2 19
0 2 2 3 -4
0 2 3 3 15
0 3 1 1 -2.1
0 3 2 2 -1.5
1 1 1 1 0.5
1 1 1 2 5.2
1 1 2 2 -5.3
1 2 1 1 7.8
1 2 1 2 -2.4
1 2 1 3 6.0
1 2 2 2 4.2
1 2 2 3 6.5
1 2 3 3 2.1
1 3 1 1 -4.5
1 3 2 2 -3.5
5 3 2 2 7.7
";
        let p = parse_sdpa(text).unwrap();
        assert_eq!(p.m(), 5);
        assert_eq!(
            p.blocks,
            vec![ConeBlock::Psd(2), ConeBlock::Psd(3), ConeBlock::Orthant(2)]
        );
        assert_eq!(p.c.as_slice(), &[1.1, -10.0, 6.6, 19.0, 4.1]);
        // b = -F_0
        assert_eq!(
            p.b.matrix(0),
            &DMatrix::from_row_slice(2, 2, &[1.4, 3.2, 3.2, 2.8])
        );
        assert_eq!(p.b.vector(2).as_slice(), &[2.1, 1.5]);
        assert_eq!(p.a[0].matrix(1)[(2, 1)], 6.5);
        assert_eq!(p.a[4].vector(2).as_slice(), &[0.0, 7.7]);
        assert_eq!(p.a[2].max_abs(), 0.0);
        assert_eq!(parse_sdpa(&emit_sdpa(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_duplicates_and_ranges() {
        let dup = "1\n1\n2\n1\n1 1 1 2 1.0\n1 1 2 1 3.0\n";
        assert!(matches!(parse_sdpa(dup), Err(ParseError::Duplicate { .. })));
        let range = "1\n1\n2\n1\n2 1 1 1 1.0\n";
        assert!(matches!(
            parse_sdpa(range),
            Err(ParseError::OutOfRange { .. })
        ));
        let pos = "1\n1\n2\n1\n1 1 3 1 1.0\n";
        assert!(matches!(
            parse_sdpa(pos),
            Err(ParseError::OutOfRange { .. })
        ));
        let diag = "1\n1\n-2\n1\n1 1 1 2 1.0\n";
        assert!(matches!(
            parse_sdpa(diag),
            Err(ParseError::OutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(matches!(parse_sdpa(""), Err(ParseError::Header(_))));
        assert!(matches!(parse_sdpa("x\n"), Err(ParseError::Header(_))));
        assert!(matches!(parse_sdpa("1\n0\n"), Err(ParseError::Header(_))));
        assert!(matches!(
            parse_sdpa("1\n1\n0\n1\n"),
            Err(ParseError::Header(_))
        ));
        assert!(matches!(
            parse_sdpa("2\n1\n2\n1\n"),
            Err(ParseError::Header(_))
        ));
        assert!(matches!(
            parse_sdpa("1\n1\n2\n1\n1 1 1\n"),
            Err(ParseError::Syntax { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn emit_parse_identity(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let blocks = vec![ConeBlock::Psd(3), ConeBlock::Orthant(2), ConeBlock::Psd(1)];
            let d = crate::model::ambient_dim(&blocks);
            let rand_el = |rng: &mut rand_chacha::ChaCha8Rng| {
                let v: Vec<f64> = (0..d)
                    .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-1e3..1e3) })
                    .collect();
                YElement::from_svec(&blocks, &v).unwrap()
            };
            let a = (0..3).map(|_| rand_el(&mut rng)).collect();
            let b = rand_el(&mut rng);
            let c = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let p = ConicProgram::new("prop", blocks.clone(), a, b, c).unwrap();
            let q = parse_sdpa(&emit_sdpa(&p)).unwrap();
            proptest::prop_assert_eq!(&p.name, &q.name);
            proptest::prop_assert_eq!(&p.c, &q.c);
            for (x, y) in p.homogenized_rows().iter().zip(q.homogenized_rows().iter()) {
                proptest::prop_assert!(x.sub(y).max_abs() <= 1e-15 * (1.0 + x.max_abs()));
            }
        }
    }
}
