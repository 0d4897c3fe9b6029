//! Post-processing of a facial reduction chain.
//!
//! Each step of the driver determines its face only to about the square root
//! of the accuracy of the previous one: the equations of `L` fix a
//! certificate only quadratically along the range of the feasible slacks, and
//! the slack equations fix the minimal face only quadratically along
//! directions of `range A` tangent to it. Taken together the two sides are
//! nonsingular. This pass therefore solves for the whole chain at once:
//! an orthogonal frame `O` per PSD block split into the groups dropped at
//! each step, certificates `y_i = O G_i Oᵀ` with the sparsity the chain
//! prescribes, and a slack `b − Ax = O M Oᵀ` supported on the last group.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::faces::{BlockFace, FaceRep};
use crate::fra::ReductionCertificate;
use crate::linalg::{levenberg_marquardt, orthogonal_complement, sym_eig, symmetrize};
use crate::model::{BlockValue, ConeBlock, ConicProgram, YElement};
use crate::reducing::strict_margin;

/// One scalar unknown of the joint system.
#[derive(Clone, Copy, Debug)]
enum Slot {
    /// Entry `(p, q)`, `p < q`, of the skew generator of block `k`'s frame.
    Rot {
        k: usize,
        p: usize,
        q: usize,
    },
    /// Entry `(p, q)`, `p ≤ q`, of `G_i` (orthant blocks use `p = q`).
    Cert {
        i: usize,
        k: usize,
        p: usize,
        q: usize,
    },
    /// Entry of the slack factor `M`.
    Slack {
        k: usize,
        p: usize,
        q: usize,
    },
    X(usize),
}

struct Chain<'a> {
    p: &'a ConicProgram,
    steps: usize,
    /// Step at which each coordinate (frame column or orthant entry) leaves
    /// the face; `steps + 1` for the minimal face.
    groups: Vec<Vec<usize>>,
    frames: Vec<DMatrix<f64>>,
    slots: Vec<Slot>,
    targets: Vec<f64>,
}

/// `(I − K)⁻¹(I + K)` for skew `K`.
fn cayley(k: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = k.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    (&id - k).lu().solve(&(&id + k))
}

struct Point {
    frames: Vec<DMatrix<f64>>,
    /// `G_1, …, G_t` in frame coordinates.
    certs: Vec<YElement>,
    slack: YElement,
    x: DVector<f64>,
}

impl<'a> Chain<'a> {
    fn new(p: &'a ConicProgram, cert: &ReductionCertificate) -> Option<(Self, DVector<f64>)> {
        let steps = cert.len();
        let x0 = cert.x_strict.as_ref()?;
        let mut frames = Vec::new();
        let mut groups = Vec::new();
        for (k, block) in p.blocks.iter().enumerate() {
            let n = block.size();
            if matches!(block, ConeBlock::Psd(_)) {
                let bases = cert
                    .faces
                    .iter()
                    .map(|f| match &f.blocks[k] {
                        BlockFace::Psd { basis, .. } => Some(basis),
                        BlockFace::Orthant { .. } => None,
                    })
                    .collect::<Option<Vec<_>>>()?;
                let (o, g) = adapted_frame(&bases, n)?;
                frames.push(o);
                groups.push(g);
            } else {
                let mut g = vec![steps + 1; n];
                for i in (1..=steps).rev() {
                    let BlockFace::Orthant { support, .. } = &cert.faces[i].blocks[k] else {
                        return None;
                    };
                    for (c, gc) in g.iter_mut().enumerate() {
                        if !support.contains(&c) {
                            *gc = i;
                        }
                    }
                }
                frames.push(DMatrix::identity(n, n));
                groups.push(g);
            }
        }

        let to_frame = |y: &YElement| YElement {
            blocks: y
                .blocks
                .iter()
                .zip(&frames)
                .map(|(b, o)| match b {
                    BlockValue::Vector(v) => BlockValue::Vector(v.clone()),
                    BlockValue::Matrix(m) => BlockValue::Matrix(o.transpose() * m * o),
                })
                .collect(),
        };
        let mut slots = Vec::new();
        let mut theta = Vec::new();
        for (k, (block, g)) in p.blocks.iter().zip(&groups).enumerate() {
            if matches!(block, ConeBlock::Psd(_)) {
                for q in 0..g.len() {
                    for pp in 0..q {
                        if g[pp] != g[q] {
                            slots.push(Slot::Rot { k, p: pp, q });
                            theta.push(0.0);
                        }
                    }
                }
            }
        }
        for i in 1..=steps {
            let gy = to_frame(&cert.ys[i]);
            for (k, g) in groups.iter().enumerate() {
                let allowed = |a: usize, b: usize| g[a].min(g[b]) < i || (g[a] == i && g[b] == i);
                match &gy.blocks[k] {
                    BlockValue::Vector(v) => {
                        for c in (0..g.len()).filter(|&c| allowed(c, c)) {
                            slots.push(Slot::Cert { i, k, p: c, q: c });
                            theta.push(v[c]);
                        }
                    }
                    BlockValue::Matrix(m) => {
                        for q in 0..g.len() {
                            for pp in (0..=q).filter(|&pp| allowed(pp, q)) {
                                slots.push(Slot::Cert { i, k, p: pp, q });
                                theta.push(m[(pp, q)]);
                            }
                        }
                    }
                }
            }
        }
        let s0 = to_frame(&p.slack(x0.as_slice()).ok()?);
        for (k, g) in groups.iter().enumerate() {
            let last = |c: usize| g[c] == steps + 1;
            match &s0.blocks[k] {
                BlockValue::Vector(v) => {
                    for c in (0..g.len()).filter(|&c| last(c)) {
                        slots.push(Slot::Slack { k, p: c, q: c });
                        theta.push(v[c]);
                    }
                }
                BlockValue::Matrix(m) => {
                    for q in (0..g.len()).filter(|&q| last(q)) {
                        for pp in (0..=q).filter(|&pp| last(pp)) {
                            slots.push(Slot::Slack { k, p: pp, q });
                            theta.push(m[(pp, q)]);
                        }
                    }
                }
            }
        }
        for (j, &v) in x0.iter().enumerate() {
            slots.push(Slot::X(j));
            theta.push(v);
        }
        let framed: Vec<YElement> = cert.ys[1..].iter().map(to_frame).collect();
        let mut chain = Chain {
            p,
            steps,
            groups,
            frames,
            slots,
            targets: Vec::new(),
        };
        chain.targets = (1..=steps)
            .map(|i| chain.group_trace(&framed[i - 1], i))
            .collect();
        Some((chain, DVector::from_vec(theta)))
    }

    fn unpack(&self, theta: &DVector<f64>) -> Option<Point> {
        let structure = &self.p.blocks;
        let mut skews: Vec<DMatrix<f64>> = self
            .frames
            .iter()
            .map(|f| DMatrix::zeros(f.nrows(), f.ncols()))
            .collect();
        let mut certs = vec![YElement::zeros(structure); self.steps];
        let mut slack = YElement::zeros(structure);
        let mut x = DVector::zeros(self.p.m());
        let put = |e: &mut YElement, k: usize, p: usize, q: usize, v: f64| match &mut e.blocks[k] {
            BlockValue::Vector(w) => w[p] = v,
            BlockValue::Matrix(m) => {
                m[(p, q)] = v;
                m[(q, p)] = v;
            }
        };
        for (s, &v) in self.slots.iter().zip(theta.iter()) {
            match *s {
                Slot::Rot { k, p, q } => {
                    skews[k][(p, q)] = v;
                    skews[k][(q, p)] = -v;
                }
                Slot::Cert { i, k, p, q } => put(&mut certs[i - 1], k, p, q, v),
                Slot::Slack { k, p, q } => put(&mut slack, k, p, q, v),
                Slot::X(j) => x[j] = v,
            }
        }
        let frames = self
            .frames
            .iter()
            .zip(&skews)
            .map(|(f, k)| Some(f * cayley(k)?))
            .collect::<Option<Vec<_>>>()?;
        Some(Point {
            frames,
            certs,
            slack,
            x,
        })
    }

    /// `O Z Oᵀ` blockwise; orthant blocks are not rotated.
    fn ambient(&self, frames: &[DMatrix<f64>], z: &YElement) -> YElement {
        YElement {
            blocks: z
                .blocks
                .iter()
                .zip(frames)
                .map(|(b, o)| match b {
                    BlockValue::Vector(v) => BlockValue::Vector(v.clone()),
                    BlockValue::Matrix(m) => {
                        BlockValue::Matrix(symmetrize(&(o * m * o.transpose())))
                    }
                })
                .collect(),
        }
    }

    fn residual_len(&self) -> usize {
        self.steps * (self.p.m() + 2) + self.p.ambient_dim()
    }

    fn residual(&self, theta: &DVector<f64>) -> DVector<f64> {
        let failed = || DVector::from_element(self.residual_len(), f64::INFINITY);
        let Some(pt) = self.unpack(theta) else {
            return failed();
        };
        let rows = self.p.homogenized_rows();
        let mut out = Vec::with_capacity(self.residual_len());
        for (i, g) in pt.certs.iter().enumerate() {
            let y = self.ambient(&pt.frames, g);
            out.extend(rows.iter().map(|r| r.dot(&y)));
            out.push(self.group_trace(g, i + 1) - self.targets[i]);
        }
        let s = self.ambient(&pt.frames, &pt.slack);
        let Ok(bx) = self.p.slack(pt.x.as_slice()) else {
            return failed();
        };
        out.extend(bx.sub(&s).to_svec().iter());
        DVector::from_vec(out)
    }

    /// Trace of `G_i` over the coordinates dropped at step `i`.
    fn group_trace(&self, g: &YElement, i: usize) -> f64 {
        g.blocks
            .iter()
            .zip(&self.groups)
            .map(|(b, grp)| {
                grp.iter()
                    .enumerate()
                    .filter(|&(_, &s)| s == i)
                    .map(|(c, _)| match b {
                        BlockValue::Vector(v) => v[c],
                        BlockValue::Matrix(m) => m[(c, c)],
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Central differences. The joint system is nonsingular, so the
    /// approximate Jacobian only slows the last iterations.
    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.residual_len(), theta.len());
        let mut t = theta.clone();
        for c in 0..theta.len() {
            let h = 1e-6 * theta[c].abs().max(1.0);
            t[c] = theta[c] + h;
            let up = self.residual(&t);
            t[c] = theta[c] - h;
            let down = self.residual(&t);
            t[c] = theta[c];
            jac.set_column(c, &((up - down) / (2.0 * h)));
        }
        jac
    }

    /// The refined chain, if every dropped block is clearly positive definite
    /// and the slack is strictly inside the last face.
    fn certificate(&self, pt: &Point, tol: &Tolerances) -> Option<ReductionCertificate> {
        let mut out = ReductionCertificate::trivial(self.p);
        for (i, g) in (1..).zip(&pt.certs) {
            for (b, grp) in g.blocks.iter().zip(&self.groups) {
                let idx: Vec<usize> = (0..grp.len()).filter(|&c| grp[c] == i).collect();
                if idx.is_empty() {
                    continue;
                }
                let least = match b {
                    BlockValue::Vector(v) => {
                        idx.iter().map(|&c| v[c]).fold(f64::INFINITY, f64::min)
                    }
                    BlockValue::Matrix(m) => {
                        let sub = m.select_rows(&idx).select_columns(&idx);
                        sym_eig(&symmetrize(&sub)).ok()?.min_value()
                    }
                };
                if least <= tol.rank * g.max_abs().max(1.0) {
                    return None;
                }
            }
            let faces = self
                .groups
                .iter()
                .zip(&pt.frames)
                .zip(&self.p.blocks)
                .map(|((grp, o), block)| {
                    let keep: Vec<usize> = (0..grp.len()).filter(|&c| grp[c] > i).collect();
                    if matches!(block, ConeBlock::Psd(_)) {
                        BlockFace::Psd {
                            n: grp.len(),
                            basis: o.select_columns(&keep),
                        }
                    } else {
                        BlockFace::Orthant {
                            dim: grp.len(),
                            support: keep,
                        }
                    }
                })
                .collect();
            out.ys.push(self.ambient(&pt.frames, g));
            out.faces.push(FaceRep { blocks: faces });
            out.reducing.push(true);
        }
        strict_margin(self.p, out.final_face(), &pt.x, tol)?;
        out.x_strict = Some(pt.x.clone());
        Some(out)
    }
}

/// Frame of a PSD block adapted to the chain: the columns dropped at step
/// `i` span `range Q_{i−1} ⊖ range Q_i`, the last ones span `range Q_t`.
fn adapted_frame(bases: &[&DMatrix<f64>], n: usize) -> Option<(DMatrix<f64>, Vec<usize>)> {
    let t = bases.len() - 1;
    let mut cols = Vec::new();
    let mut groups = Vec::new();
    for i in 1..=t {
        let prev = bases[i - 1];
        let inner = prev.transpose() * bases[i];
        let dropped = prev * orthogonal_complement(&inner, prev.ncols());
        for c in dropped.column_iter() {
            cols.push(c.into_owned());
            groups.push(i);
        }
    }
    for c in bases[t].column_iter() {
        cols.push(c.into_owned());
        groups.push(t + 1);
    }
    if cols.len() != n {
        return None;
    }
    // re-orthonormalize in order, which keeps the nested spans
    Some((DMatrix::from_columns(&cols).qr().q(), groups))
}

/// Refines a chain produced by the driver. Returns `None` when the chain has
/// no strictly feasible point, has no reducing steps, or the joint system
/// does not converge to roundoff with the driver's dimensions; the caller
/// then keeps the original chain.
pub fn refine_chain(
    p: &ConicProgram,
    cert: &ReductionCertificate,
    tol: &Tolerances,
) -> Option<ReductionCertificate> {
    if cert.is_empty() || cert.reducing.iter().skip(1).any(|r| !r) {
        return None;
    }
    let (chain, mut theta) = Chain::new(p, cert)?;
    let res = levenberg_marquardt(
        &mut theta,
        |t| chain.residual(t),
        |t| chain.jacobian(t),
        400,
    );
    let pt = chain.unpack(&theta)?;
    let scale =
        p.a.iter()
            .zip(pt.x.iter())
            .map(|(a, x)| a.norm() * x.abs())
            .fold(p.b.norm().max(1.0), f64::max);
    if res.amax().is_nan() || res.amax() > 1e-12 * scale {
        return None;
    }
    chain.certificate(&pt, tol)
}
