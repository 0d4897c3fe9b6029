//! Extended duals over the lifted system of pairs `(u_i, v_i)` with
//! `u_i ∈ K*` and `v_i` tangent to the earlier `u`'s.
//!
//! Orthant blocks are lifted to diagonal PSD blocks, then the tangent
//! constraints are written in the block form
//! `[[base_i, w_i], [w_iᵀ, β_i I]] ⪰ 0`, `v_i = w_i + w_iᵀ`. The result is an
//! ordinary [`ConicProgram`] whose dual is the extended dual, so it can be
//! handed to the interior-point solver or written as SDPA.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::error::{DualError, SolverError};
use crate::faces::{schur_block, tangent_membership_schur, tangent_pattern_membership};
use crate::fra::{
    check, compute_ell, decompose_certificates, l_residual, reduced_program, run_facial_reduction,
    Check, FraOptions, ReductionCertificate,
};
use crate::linalg::{levenberg_marquardt, min_eigenvalue, sym_eig, symmetrize, Compensated};
use crate::model::{BlockValue, ConeBlock, ConicProgram, YElement};
use crate::solver::{solve_conic_lp, SolveResult, SolveStatus, SolverOptions};

/// Which tangent encoding the extended dual uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Base `u_0 + … + u_{i−1}`, free `β_i`.
    Star,
    /// Base `u_{i−1}`, free `β_i`.
    Simple,
    /// Base `u_{i−1}`, identity in place of `β_i I`.
    Primed,
    /// As `Primed` with `v_i` replaced by `w_i + w_iᵀ` everywhere.
    Ramana,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Star,
        Variant::Simple,
        Variant::Primed,
        Variant::Ramana,
    ];

    fn free_beta(self) -> bool {
        matches!(self, Variant::Star | Variant::Simple)
    }

    fn explicit_v(self) -> bool {
        self != Variant::Ramana
    }

    /// Indices `j ≥ 1` whose `u_j` form the tangent base at step `i`.
    fn base(self, i: usize) -> std::ops::Range<usize> {
        match self {
            Variant::Star => 1..i,
            _ => i.saturating_sub(1).max(1)..i,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Star => "star",
            Variant::Simple => "simple",
            Variant::Primed => "primed",
            Variant::Ramana => "ramana",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown variant {0:?}, expected star, simple, primed or ramana")]
pub struct UnknownVariant(pub String);

impl FromStr for Variant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "star" => Ok(Variant::Star),
            "simple" => Ok(Variant::Simple),
            "primed" => Ok(Variant::Primed),
            "ramana" => Ok(Variant::Ramana),
            _ => Err(UnknownVariant(s.to_string())),
        }
    }
}

/// What a block of the encoded program holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    U {
        step: usize,
        block: usize,
    },
    /// `[[base, w], [wᵀ, βI]]` for one lifted block.
    Z {
        step: usize,
        block: usize,
    },
    /// Positive and negative parts of the upper triangles of `v_step`.
    V {
        step: usize,
    },
}

/// Position of every variable of the extended dual inside the encoded program.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    /// One entry per block of the encoded program.
    pub slots: Vec<Slot>,
    /// `u[i][k]`, for `i = 1..=ℓ+1` (`u[0]` is empty).
    pub u: Vec<Vec<usize>>,
    /// `z[i][k]`, for `i = 2..=ℓ+1`.
    pub z: Vec<Vec<usize>>,
    /// `v[i]`, present for `i ≥ 2` unless the variant eliminates `v`.
    pub v: Vec<Option<usize>>,
    orders: Vec<usize>,
    tri_offsets: Vec<usize>,
    tri_len: usize,
}

impl Layout {
    fn new(orders: &[usize], ell: usize, variant: Variant) -> Self {
        let t = ell + 1;
        let nb = orders.len();
        let mut slots = Vec::new();
        let mut u = vec![Vec::new(); t + 1];
        let mut z = vec![Vec::new(); t + 1];
        let mut v = vec![None; t + 1];
        for i in 1..=t {
            for k in 0..nb {
                u[i].push(slots.len());
                slots.push(Slot::U { step: i, block: k });
            }
            if i >= 2 {
                for k in 0..nb {
                    z[i].push(slots.len());
                    slots.push(Slot::Z { step: i, block: k });
                }
                if variant.explicit_v() {
                    v[i] = Some(slots.len());
                    slots.push(Slot::V { step: i });
                }
            }
        }
        let mut tri_offsets = Vec::with_capacity(nb);
        let mut tri_len = 0;
        for &n in orders {
            tri_offsets.push(tri_len);
            tri_len += n * (n + 1) / 2;
        }
        Self {
            slots,
            u,
            z,
            v,
            orders: orders.to_vec(),
            tri_offsets,
            tri_len,
        }
    }

    pub fn ell(&self) -> usize {
        self.u.len() - 2
    }

    fn structure(&self) -> Vec<ConeBlock> {
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::U { block, .. } => ConeBlock::Psd(self.orders[block]),
                Slot::Z { block, .. } => ConeBlock::Psd(2 * self.orders[block]),
                Slot::V { .. } => ConeBlock::Orthant(2 * self.tri_len),
            })
            .collect()
    }

    fn tri(&self, k: usize, p: usize, q: usize) -> usize {
        let (p, q) = (p.min(q), p.max(q));
        self.tri_offsets[k] + q * (q + 1) / 2 + p
    }
}

/// The encoded extended dual together with what is needed to read it back.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedDualProgram {
    /// A program whose dual is the extended dual.
    pub program: ConicProgram,
    pub layout: Layout,
    pub variant: Variant,
    pub ell: usize,
    /// The input with orthant blocks lifted to diagonal PSD blocks.
    pub lifted: ConicProgram,
    /// Which input blocks were orthants.
    pub orthant_mask: Vec<bool>,
}

/// A candidate for the lifted system, indexed `i = 0..=ℓ+1`.
///
/// `w[i]` holds one matrix per lifted block; an empty `w[i]` means no Schur
/// witness is supplied for that step. `beta` is ignored by the variants with a
/// fixed identity block.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedDualPoint {
    pub u: Vec<YElement>,
    pub v: Vec<YElement>,
    pub w: Vec<Vec<DMatrix<f64>>>,
    pub beta: Vec<f64>,
}

impl ExtendedDualPoint {
    pub fn ell(&self) -> usize {
        self.u.len().saturating_sub(2)
    }

    /// `u_{ℓ+1} + v_{ℓ+1}`.
    pub fn y(&self) -> Option<YElement> {
        Some(self.u.last()?.add(self.v.last()?))
    }
}

/// Orthant blocks as diagonal PSD blocks.
pub fn lift_element(y: &YElement) -> YElement {
    YElement {
        blocks: y
            .blocks
            .iter()
            .map(|b| match b {
                BlockValue::Vector(v) => BlockValue::Matrix(DMatrix::from_diagonal(v)),
                m => m.clone(),
            })
            .collect(),
    }
}

fn lower_element(y: &YElement, mask: &[bool]) -> YElement {
    YElement {
        blocks: y
            .blocks
            .iter()
            .zip(mask)
            .map(|(b, &orth)| match b {
                BlockValue::Matrix(m) if orth => BlockValue::Vector(m.diagonal()),
                b => b.clone(),
            })
            .collect(),
    }
}

fn orders(structure: &[ConeBlock]) -> Vec<usize> {
    structure.iter().map(ConeBlock::size).collect()
}

/// Adds `coef · Y_pq` (symmetric entry) to a row.
fn add_entry(row: &mut YElement, blk: usize, p: usize, q: usize, coef: f64) {
    match &mut row.blocks[blk] {
        BlockValue::Vector(v) => v[p] += coef,
        BlockValue::Matrix(m) => {
            if p == q {
                m[(p, p)] += coef;
            } else {
                m[(p, q)] += 0.5 * coef;
                m[(q, p)] += 0.5 * coef;
            }
        }
    }
}

fn add_matrix(row: &mut YElement, blk: usize, m: &DMatrix<f64>, offset: usize, coef: f64) {
    if let BlockValue::Matrix(r) = &mut row.blocks[blk] {
        let n = m.nrows();
        let mut view = r.view_mut((offset, offset), (n, n));
        view += m * coef;
    }
}

struct Rows<'a> {
    layout: &'a Layout,
    variant: Variant,
    structure: Vec<ConeBlock>,
    rows: Vec<YElement>,
    rhs: Vec<f64>,
}

impl Rows<'_> {
    fn zero(&self) -> YElement {
        YElement::zeros(&self.structure)
    }

    /// Adds `coef · ⟨r, u_i + v_i⟩` to `row`, `r` a lifted element.
    fn add_pair(&self, row: &mut YElement, i: usize, r: &YElement, coef: f64) {
        for (k, &blk) in self.layout.u[i].iter().enumerate() {
            add_matrix(row, blk, r.matrix(k), 0, coef);
        }
        if i < 2 {
            return;
        }
        for (k, &n) in self.layout.orders.iter().enumerate() {
            let a = r.matrix(k);
            match self.layout.v[i] {
                Some(vblk) => {
                    let d = self.layout.tri_len;
                    for q in 0..n {
                        for p in 0..=q {
                            let f = coef * a[(p, q)] * if p == q { 1.0 } else { 2.0 };
                            let e = self.layout.tri(k, p, q);
                            add_entry(row, vblk, e, e, f);
                            add_entry(row, vblk, d + e, d + e, -f);
                        }
                    }
                }
                None => {
                    // ⟨a, w + wᵀ⟩ = ⟨[[0, a], [a, 0]], Z⟩
                    if let BlockValue::Matrix(m) = &mut row.blocks[self.layout.z[i][k]] {
                        let mut up = m.view_mut((0, n), (n, n));
                        up += a * coef;
                        let mut lo = m.view_mut((n, 0), (n, n));
                        lo += a.transpose() * coef;
                    }
                }
            }
        }
    }

    fn push(&mut self, row: YElement, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    fn tangent_rows(&mut self, i: usize) {
        let layout = self.layout;
        for (k, &n) in layout.orders.iter().enumerate() {
            let zb = layout.z[i][k];
            // upper-left block equals the base
            for q in 0..n {
                for p in 0..=q {
                    let mut row = self.zero();
                    add_entry(&mut row, zb, p, q, 1.0);
                    for j in self.variant.base(i) {
                        add_entry(&mut row, layout.u[j][k], p, q, -1.0);
                    }
                    self.push(row, 0.0);
                }
            }
            // lower-right block equals βI (shared β) or I
            for q in 0..n {
                for p in 0..q {
                    let mut row = self.zero();
                    add_entry(&mut row, zb, n + p, n + q, 1.0);
                    self.push(row, 0.0);
                }
                if self.variant.free_beta() {
                    if k == 0 && q == 0 {
                        continue;
                    }
                    let mut row = self.zero();
                    add_entry(&mut row, zb, n + q, n + q, 1.0);
                    let n0 = layout.orders[0];
                    add_entry(&mut row, layout.z[i][0], n0, n0, -1.0);
                    self.push(row, 0.0);
                } else {
                    let mut row = self.zero();
                    add_entry(&mut row, zb, n + q, n + q, 1.0);
                    self.push(row, 1.0);
                }
            }
            // v = w + wᵀ
            if let Some(vblk) = layout.v[i] {
                let d = layout.tri_len;
                for q in 0..n {
                    for p in 0..=q {
                        let e = layout.tri(k, p, q);
                        let mut row = self.zero();
                        add_entry(&mut row, vblk, e, e, 1.0);
                        add_entry(&mut row, vblk, d + e, d + e, -1.0);
                        add_entry(&mut row, zb, p, n + q, -1.0);
                        add_entry(&mut row, zb, q, n + p, -1.0);
                        self.push(row, 0.0);
                    }
                }
            }
        }
    }
}

/// Orthonormal basis of `span(a_1, …, a_m, b)`, as elements.
fn row_space(p: &ConicProgram) -> Vec<YElement> {
    let rows = p.homogenized_rows();
    let cols: Vec<DVector<f64>> = rows.iter().map(YElement::to_svec).collect();
    let svd = DMatrix::from_columns(&cols).svd(true, false);
    let smax = svd.singular_values.max();
    let u = svd.u.expect("requested");
    svd.singular_values
        .iter()
        .zip(u.column_iter())
        .filter(|(s, _)| **s > 1e-12 * smax.max(1.0))
        .map(|(_, c)| {
            YElement::from_svec(&p.blocks, c.as_slice()).expect("basis matches the structure")
        })
        .collect()
}

/// Encodes the extended dual of `p` for `variant` with lift depth `ell`
/// (default [`compute_ell`]).
pub fn build_extended_dual(
    p: &ConicProgram,
    variant: Variant,
    ell: Option<usize>,
) -> Result<ExtendedDualProgram, DualError> {
    let ell = ell.unwrap_or_else(|| compute_ell(p));
    let lifted = p.lift_orthants();
    let orthant_mask: Vec<bool> = p
        .blocks
        .iter()
        .map(|b| matches!(b, ConeBlock::Orthant(_)))
        .collect();
    let layout = Layout::new(&orders(&lifted.blocks), ell, variant);
    let t = ell + 1;
    let mut rows = Rows {
        layout: &layout,
        variant,
        structure: layout.structure(),
        rows: Vec::new(),
        rhs: Vec::new(),
    };
    for (j, a) in lifted.a.iter().enumerate() {
        let mut row = rows.zero();
        rows.add_pair(&mut row, t, a, 1.0);
        rows.push(row, lifted.c[j]);
    }
    let basis = row_space(&lifted);
    for i in 1..=ell {
        for r in &basis {
            let mut row = rows.zero();
            rows.add_pair(&mut row, i, r, 1.0);
            rows.push(row, 0.0);
        }
    }
    for i in 2..=t {
        rows.tangent_rows(i);
    }
    let mut objective = rows.zero();
    rows.add_pair(&mut objective, t, &lifted.b, 1.0);
    let Rows {
        structure,
        rows: a,
        rhs,
        ..
    } = rows;
    let program = ConicProgram::new(
        format!("{}-ext-{variant}-l{ell}", p.name),
        structure,
        a,
        objective,
        DVector::from_vec(rhs),
    )?;
    Ok(ExtendedDualProgram {
        program,
        layout,
        variant,
        ell,
        lifted,
        orthant_mask,
    })
}

/// A solved extended dual read back through the layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedDual {
    /// In the lifted structure.
    pub point: ExtendedDualPoint,
    /// `u_{ℓ+1} + v_{ℓ+1}` in the structure of the input program.
    pub y: YElement,
    /// `⟨b, y⟩`.
    pub value: f64,
}

/// Inverts the layout on the dual part of a solver result.
pub fn extract_dual_solution(
    prog: &ExtendedDualProgram,
    res: &SolveResult,
) -> Result<ExtractedDual, DualError> {
    if res.status != SolveStatus::Optimal {
        return Err(DualError::NotOptimal(format!("{:?}", res.status)));
    }
    read_point(prog, &res.y)
}

/// Inverts the layout on an element of the encoded cone.
pub fn read_point(prog: &ExtendedDualProgram, y: &YElement) -> Result<ExtractedDual, DualError> {
    if !y.matches(&prog.program.blocks) {
        return Err(DualError::Layout(format!(
            "solution has {} blocks, program has {}",
            y.blocks.len(),
            prog.program.blocks.len()
        )));
    }
    let layout = &prog.layout;
    let structure = &prog.lifted.blocks;
    let t = prog.ell + 1;
    let zero = YElement::zeros(structure);
    let mut point = ExtendedDualPoint {
        u: vec![zero.clone(); t + 1],
        v: vec![zero.clone(); t + 1],
        w: vec![Vec::new(); t + 1],
        beta: vec![if prog.variant.free_beta() { 0.0 } else { 1.0 }; t + 1],
    };
    point.w[1] = layout
        .orders
        .iter()
        .map(|&n| DMatrix::zeros(n, n))
        .collect();
    for i in 1..=t {
        point.u[i] = YElement {
            blocks: layout.u[i]
                .iter()
                .map(|&blk| y.blocks[blk].clone())
                .collect(),
        };
        if i < 2 {
            continue;
        }
        let zs: Vec<&DMatrix<f64>> = layout.z[i].iter().map(|&b| y.matrix(b)).collect();
        point.w[i] = zs
            .iter()
            .zip(&layout.orders)
            .map(|(z, &n)| z.view((0, n), (n, n)).into_owned())
            .collect();
        if prog.variant.free_beta() {
            let (sum, count) = zs
                .iter()
                .zip(&layout.orders)
                .fold((0.0, 0usize), |(s, c), (z, &n)| {
                    (s + (n..2 * n).map(|d| z[(d, d)]).sum::<f64>(), c + n)
                });
            point.beta[i] = sum / count as f64;
        }
        point.v[i] = match layout.v[i] {
            Some(vblk) => {
                let x = y.vector(vblk);
                let d = layout.tri_len;
                YElement {
                    blocks: layout
                        .orders
                        .iter()
                        .enumerate()
                        .map(|(k, &n)| {
                            BlockValue::Matrix(DMatrix::from_fn(n, n, |p, q| {
                                let e = layout.tri(k, p, q);
                                x[e] - x[d + e]
                            }))
                        })
                        .collect(),
                }
            }
            None => YElement {
                blocks: point.w[i]
                    .iter()
                    .map(|w| BlockValue::Matrix(w + w.transpose()))
                    .collect(),
            },
        };
    }
    let lifted_y = point.u[t].add(&point.v[t]);
    let y = lower_element(&lifted_y, &prog.orthant_mask);
    let value = prog.lifted.b.dot(&lifted_y);
    Ok(ExtractedDual { point, y, value })
}

/// Places a point into the variables of the encoded program.
///
/// The `Z` blocks are rebuilt from the base of each step, `w_i` and `β_i`
/// (or the identity); steps without a witness get `w = 0`.
pub fn write_point(
    prog: &ExtendedDualProgram,
    pt: &ExtendedDualPoint,
) -> Result<YElement, DualError> {
    let t = prog.ell + 1;
    let layout = &prog.layout;
    if pt.u.len() != t + 1 || pt.v.len() != t + 1 || pt.w.len() != t + 1 || pt.beta.len() != t + 1 {
        return Err(DualError::Layout(format!(
            "point has {} steps, program expects {}",
            pt.u.len(),
            t + 1
        )));
    }
    let lifted = &prog.lifted.blocks;
    if let Some(bad) = pt.u.iter().chain(&pt.v).find(|y| !y.matches(lifted)) {
        return Err(DualError::Layout(format!(
            "element with blocks {} does not match {}",
            crate::model::describe(&bad.structure()),
            crate::model::describe(lifted)
        )));
    }
    let mut y = YElement::zeros(&prog.program.blocks);
    for i in 1..=t {
        for (k, &blk) in layout.u[i].iter().enumerate() {
            y.blocks[blk] = pt.u[i].blocks[k].clone();
        }
        if i < 2 {
            continue;
        }
        let beta = if prog.variant.free_beta() {
            pt.beta[i]
        } else {
            1.0
        };
        for (k, &n) in layout.orders.iter().enumerate() {
            let mut base = DMatrix::zeros(n, n);
            for j in prog.variant.base(i) {
                base += pt.u[j].matrix(k);
            }
            let w = pt.w[i]
                .get(k)
                .cloned()
                .unwrap_or_else(|| DMatrix::zeros(n, n));
            y.blocks[layout.z[i][k]] = BlockValue::Matrix(schur_block(&base, &w, beta));
        }
        if let Some(vblk) = layout.v[i] {
            let d = layout.tri_len;
            let mut x = DVector::zeros(2 * d);
            for (k, &n) in layout.orders.iter().enumerate() {
                let v = pt.v[i].matrix(k);
                for q in 0..n {
                    for p in 0..=q {
                        let e = layout.tri(k, p, q);
                        x[e] = v[(p, q)].max(0.0);
                        x[d + e] = (-v[(p, q)]).max(0.0);
                    }
                }
            }
            y.blocks[vblk] = BlockValue::Vector(x);
        }
    }
    Ok(y)
}

/// Outcome of [`solve_extended_dual`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedSolve {
    pub dual: ExtractedDual,
    /// `⟨c, x⟩` of the primal point found on the minimal face.
    pub primal_value: f64,
    pub primal_x: DVector<f64>,
    /// Reducing steps taken by facial reduction on the input.
    pub reduction_steps: usize,
    /// `max_r |⟨row_r, Y⟩ − c_r|` for the point written into the encoded program.
    pub equality_residual: f64,
    /// Smallest eigenvalue (or entry) over the encoded cone blocks.
    pub cone_margin: f64,
}

fn numerical(msg: String) -> DualError {
    DualError::Solver(SolverError::NumericalFailure(msg))
}

/// Optimal `y ∈ F_min*` with `A*y = c`, split as `expand(Z) + v`, `v ∈ F^⊥`,
/// together with the primal optimum on the face.
fn face_dual(
    p: &ConicProgram,
    cert: &ReductionCertificate,
    opts: &FraOptions,
) -> Result<(YElement, YElement, DVector<f64>), DualError> {
    let face = cert.final_face();
    let red = reduced_program(p, cert, &opts.tol)?;
    let (z, x) = if red.program.m() == 0 {
        (YElement::zeros(&red.program.blocks), red.offset.clone())
    } else {
        let res = solve_conic_lp(&red.program, &SolverOptions::with_tol(opts.tol.solve));
        if res.status != SolveStatus::Optimal {
            return Err(DualError::NotOptimal(format!(
                "program over the minimal face ended with status {:?}",
                res.status
            )));
        }
        (res.y, red.lift(res.x.as_slice()))
    };
    let u = face.expand(&z);
    let r = &p.c - p.adjoint(&u)?;
    let comps: Vec<YElement> = p.a.iter().map(|a| face.project_complement(a)).collect();
    let gram = DMatrix::from_fn(comps.len(), comps.len(), |i, j| comps[i].dot(&comps[j]));
    let mu = gram
        .svd(true, true)
        .solve(&r, 1e-14)
        .map_err(|e| numerical(e.into()))?;
    let mut v = YElement::zeros(&p.blocks);
    for (c, m) in comps.iter().zip(mu.iter()) {
        v.axpy(*m, c);
    }
    Ok((u, v, x))
}

/// An optimal solution of the extended dual, built from facial reduction.
///
/// The extended dual has no strictly feasible point whenever the input lacks
/// one, so interior-point methods stall on it. Instead the certificates of a
/// reduction chain are split into pairs `(u_i, v_i)`, padded with leading
/// zero pairs to length `ℓ`, and closed by an optimal `y ∈ F_min*` taken from
/// the program over the minimal face (where Slater's condition holds). For the
/// variants with base `u_{i−1}` the pairs are accumulated, and for the
/// identity-block variants rescaled backwards by `λ_{i−1} = λ_i² β_i`. The
/// point is written into the encoded program and measured there.
pub fn solve_extended_dual(
    prog: &ExtendedDualProgram,
    opts: &FraOptions,
) -> Result<ExtendedSolve, DualError> {
    let lifted = &prog.lifted;
    let input = lower_program(lifted, &prog.orthant_mask);
    let cert0 = run_facial_reduction(&input, opts).map_err(|e| DualError::Solver(e.source))?;
    let steps = cert0.reducing_steps();
    if steps > prog.ell {
        return Err(DualError::Unsupported(format!(
            "the reduction chain has length {steps}, more than the extended dual depth {}",
            prog.ell
        )));
    }
    let ys: Vec<YElement> = cert0.ys[1..].iter().map(lift_element).collect();
    let mut cert = ReductionCertificate::from_certificates(lifted, &ys, opts.tol.rank);
    cert.x_strict = cert0.x_strict.clone();
    let dec = decompose_certificates(lifted, &cert, opts.tol.accept)
        .map_err(|e| numerical(e.to_string()))?;
    let (u_last, v_last, x) = face_dual(lifted, &cert, opts)?;

    let t = prog.ell + 1;
    let zero = YElement::zeros(&lifted.blocks);
    let pad = prog.ell - steps;
    let mut u = vec![zero.clone(); t + 1];
    let mut v = vec![zero.clone(); t + 1];
    for (j, (ui, vi)) in dec.pairs.iter().enumerate().skip(1) {
        u[pad + j] = ui.clone();
        v[pad + j] = vi.clone();
    }
    // v_1 is tangent to {0}
    v[1] = zero.clone();
    if prog.variant != Variant::Star {
        for i in 2..t {
            u[i] = u[i].add(&u[i - 1]);
            v[i] = v[i].add(&v[i - 1]);
        }
    }
    u[t] = u_last;
    v[t] = v_last;

    let wtol = opts.tol.rank;
    let mut w = vec![Vec::new(); t + 1];
    let mut beta = vec![0.0; t + 1];
    for i in 1..=t {
        let mut base = zero.clone();
        for j in prog.variant.base(i) {
            base.axpy(1.0, &u[j]);
        }
        let mut wi = Vec::new();
        let mut bi = 0.0_f64;
        for k in 0..lifted.blocks.len() {
            let sw = tangent_membership_schur(base.matrix(k), v[i].matrix(k), wtol)
                .ok_or_else(|| numerical(format!("step {i}: v is not tangent to its base")))?;
            bi = bi.max(sw.beta);
            wi.push(sw.w);
        }
        w[i] = wi;
        beta[i] = bi;
    }
    if !prog.variant.free_beta() {
        let mut lambda = vec![1.0; t + 1];
        for i in (2..=t).rev() {
            lambda[i - 1] = lambda[i] * lambda[i] * beta[i];
        }
        for i in 1..=t {
            u[i] = u[i].scaled(lambda[i]);
            v[i] = v[i].scaled(lambda[i]);
            for m in &mut w[i] {
                *m *= lambda[i];
            }
            beta[i] = 1.0;
        }
    }
    let point = ExtendedDualPoint { u, v, w, beta };
    let y_enc = write_point(prog, &point)?;
    let equality_residual = (prog.program.adjoint(&y_enc)? - &prog.program.c).amax();
    let cone_margin = y_enc
        .blocks
        .iter()
        .map(|b| match b {
            BlockValue::Matrix(m) => min_eigenvalue(m),
            BlockValue::Vector(x) => x.min(),
        })
        .fold(f64::INFINITY, f64::min);
    let lifted_y = point.u[t].add(&point.v[t]);
    let dual = ExtractedDual {
        y: lower_element(&lifted_y, &prog.orthant_mask),
        value: lifted.b.dot(&lifted_y),
        point,
    };
    Ok(ExtendedSolve {
        primal_value: lifted.c.dot(&x),
        primal_x: x,
        dual,
        reduction_steps: steps,
        equality_residual,
        cone_margin,
    })
}

fn lower_program(lifted: &ConicProgram, mask: &[bool]) -> ConicProgram {
    ConicProgram {
        name: lifted.name.clone(),
        blocks: lifted
            .blocks
            .iter()
            .zip(mask)
            .map(|(b, &orth)| {
                if orth {
                    ConeBlock::Orthant(b.size())
                } else {
                    *b
                }
            })
            .collect(),
        a: lifted.a.iter().map(|a| lower_element(a, mask)).collect(),
        b: lower_element(&lifted.b, mask),
        c: lifted.c.clone(),
    }
}

/// Result of [`check_extended_point`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedReport {
    pub checks: Vec<Check>,
    /// `⟨b, u_{ℓ+1} + v_{ℓ+1}⟩`.
    pub objective: f64,
    /// `‖A*(u_{ℓ+1} + v_{ℓ+1}) − c‖_∞`.
    pub a_residual: f64,
}

impl ExtendedReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failed(&self, name: &str) -> bool {
        self.failures().any(|c| c.name == name)
    }
}

impl fmt::Display for ExtendedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        writeln!(f, "objective: {:e}", self.objective)?;
        writeln!(f, "A* residual: {:e}", self.a_residual)
    }
}

/// Rechecks every constraint of the lifted system for `variant`.
///
/// Elements may be given in the structure of `p` or of its orthant lift.
/// Steps with a witness are checked in the block form; the others with the
/// eigenbasis pattern of the tangent space.
pub fn check_extended_point(
    p: &ConicProgram,
    pt: &ExtendedDualPoint,
    variant: Variant,
    tol: f64,
) -> ExtendedReport {
    let lifted = p.lift_orthants();
    let mut checks = Vec::new();
    let fit = |y: &YElement| -> Option<YElement> {
        if y.matches(&lifted.blocks) {
            Some(y.clone())
        } else if y.matches(&p.blocks) {
            Some(lift_element(y))
        } else {
            None
        }
    };
    let u: Option<Vec<YElement>> = pt.u.iter().map(fit).collect();
    let v: Option<Vec<YElement>> = pt.v.iter().map(fit).collect();
    let n_orders = orders(&lifted.blocks);
    let w_ok = pt.w.iter().all(|w| {
        w.is_empty()
            || (w.len() == n_orders.len()
                && w.iter().zip(&n_orders).all(|(m, &n)| m.shape() == (n, n)))
    });
    let shape_ok = pt.u.len() >= 2
        && pt.v.len() == pt.u.len()
        && pt.w.len() == pt.u.len()
        && pt.beta.len() == pt.u.len()
        && w_ok;
    let (Some(u), Some(v), true) = (u, v, shape_ok) else {
        checks.push(check(
            None,
            "structure",
            false,
            format!(
                "{} u, {} v, {} w, {} beta; blocks must match {}",
                pt.u.len(),
                pt.v.len(),
                pt.w.len(),
                pt.beta.len(),
                crate::model::describe(&p.blocks)
            ),
        ));
        return ExtendedReport {
            checks,
            objective: f64::NAN,
            a_residual: f64::NAN,
        };
    };
    let t = u.len() - 1;
    checks.push(check(
        None,
        "structure",
        true,
        format!("ell = {}, variant {variant}", t - 1),
    ));
    let start = u[0].max_abs().max(v[0].max_abs());
    checks.push(check(
        Some(0),
        "zero start",
        start <= tol,
        format!("max |u_0|, |v_0| = {start:e}"),
    ));
    for (i, ui) in u.iter().enumerate().skip(1) {
        let worst = ui
            .blocks
            .iter()
            .map(|b| match b {
                BlockValue::Matrix(m) => min_eigenvalue(m),
                BlockValue::Vector(x) => x.min(),
            })
            .fold(f64::INFINITY, f64::min);
        let scale = ui.max_abs().max(1.0);
        checks.push(check(
            Some(i),
            "u psd",
            worst >= -tol * scale,
            format!("min eigenvalue {worst:e}"),
        ));
    }
    for (i, (ui, vi)) in u.iter().zip(&v).enumerate().take(t).skip(1) {
        let y = ui.add(vi);
        let r = l_residual(&lifted, &y);
        checks.push(check(
            Some(i),
            "in L",
            r <= tol,
            format!("relative residual {r:e}"),
        ));
    }
    for (i, vi) in v.iter().enumerate().skip(1) {
        let mut base = YElement::zeros(&lifted.blocks);
        for j in variant.base(i) {
            base.axpy(1.0, &u[j]);
        }
        let scale = vi.max_abs().max(base.max_abs()).max(1.0);
        if pt.w[i].is_empty() {
            let ok = tangent_pattern_membership(&base, vi, tol.max(1e-12)).unwrap_or(false);
            checks.push(check(
                Some(i),
                "tangent (pattern)",
                ok,
                format!("v_{i} against the eigenbasis of its base"),
            ));
            continue;
        }
        let beta = if variant.free_beta() { pt.beta[i] } else { 1.0 };
        let mut recon = 0.0_f64;
        let mut lmin = f64::INFINITY;
        for (k, w) in pt.w[i].iter().enumerate() {
            recon = recon.max((w + w.transpose() - vi.matrix(k)).amax());
            lmin = lmin.min(min_eigenvalue(&schur_block(base.matrix(k), w, beta)));
        }
        let wscale = scale * beta.abs().max(1.0);
        checks.push(check(
            Some(i),
            "tangent (schur)",
            recon <= tol * scale && lmin >= -tol * wscale,
            format!("|w + wT - v| = {recon:e}, block min eigenvalue {lmin:e}, beta {beta}"),
        ));
    }
    let y = u[t].add(&v[t]);
    let aty = lifted.adjoint(&y).expect("lifted structure");
    let a_residual = (aty - &lifted.c).amax();
    let cscale = lifted.c.amax().max(1.0);
    checks.push(check(
        Some(t),
        "A* = c",
        a_residual <= tol * cscale,
        format!("max residual {a_residual:e}"),
    ));
    ExtendedReport {
        checks,
        objective: lifted.b.dot(&y),
        a_residual,
    }
}

/// Upper bound on `α` in [`fmin_membership`], after `s` and `b` are scaled
/// to unit norm.
pub const ALPHA_CAP: f64 = 1e4;

/// Weight of `α` next to `t` in the membership objective.
const ALPHA_WEIGHT: f64 = 1e-6;

/// Outcome of [`fmin_membership_detail`].
#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Smallest `t` with `αb − Ax − s + t·e ∈ K`, `s` and `b` normalized.
    pub violation: f64,
    pub alpha: f64,
    pub x: DVector<f64>,
}

/// Decides `s ∈ F_min` through `0 ≤_K s ≤_K αb − Ax`, `α ≥ 0`.
pub fn fmin_membership(p: &ConicProgram, s: &YElement, tol: f64) -> Result<bool, DualError> {
    Ok(fmin_membership_detail(p, s, tol)?.member)
}

/// As [`fmin_membership`], also returning the measured violation and the
/// minimizing `(x, α)`.
///
/// The feasibility problem is posed as `min t + 1e-6 α` subject to
/// `αb − Ax − s + t·e ∈ K`, `0 ≤ α ≤ ALPHA_CAP`, `t ≥ −1` with `e` the
/// identity of `K`, which is strictly feasible and bounded.
pub fn fmin_membership_detail(
    p: &ConicProgram,
    s: &YElement,
    tol: f64,
) -> Result<Membership, DualError> {
    s.check_structure(&p.blocks)?;
    let m = p.m();
    let snorm = s.norm();
    if snorm == 0.0 {
        return Ok(Membership {
            member: true,
            violation: 0.0,
            alpha: 0.0,
            x: DVector::zeros(m),
        });
    }
    let s_hat = s.scaled(1.0 / snorm);
    let outside = s_hat.cone_violation();
    if outside > tol {
        return Ok(Membership {
            member: false,
            violation: outside,
            alpha: 0.0,
            x: DVector::zeros(m),
        });
    }
    let bnorm = p.b.norm();
    let b_hat = if bnorm > 0.0 {
        p.b.scaled(1.0 / bnorm)
    } else {
        p.b.clone()
    };
    let mut blocks = p.blocks.clone();
    blocks.push(ConeBlock::Orthant(3));
    let extend = |y: &YElement, tail: [f64; 3]| -> YElement {
        let mut blocks = y.blocks.clone();
        blocks.push(BlockValue::Vector(DVector::from_column_slice(&tail)));
        YElement { blocks }
    };
    let mut a: Vec<YElement> = p.a.iter().map(|ai| extend(ai, [0.0; 3])).collect();
    a.push(extend(&b_hat.scaled(-1.0), [-1.0, 1.0, 0.0]));
    a.push(extend(
        &YElement::identity(&p.blocks).scaled(-1.0),
        [0.0, 0.0, -1.0],
    ));
    let b = extend(&s_hat.scaled(-1.0), [0.0, ALPHA_CAP, 1.0]);
    // a slight pull on α keeps the solve away from the far end of the
    // optimal set, where αb − Ax is huge and the gap is badly conditioned
    let mut c = DVector::zeros(m + 2);
    c[m] = -ALPHA_WEIGHT;
    c[m + 1] = -1.0;
    let prog = ConicProgram::new(format!("{}-fmin", p.name), blocks, a, b, c)?;
    let res = solve_conic_lp(&prog, &SolverOptions::with_tol(1e-9));
    // the optimum sits on a face without strict complementarity whenever s is
    // a member, so a stalled solve is expected; the verdict below is measured
    // at the returned (x, α) and does not rely on the solver's residuals
    let usable = matches!(
        res.status,
        SolveStatus::Optimal | SolveStatus::NumericalFailure
    ) && res.x.iter().all(|v| v.is_finite());
    if !usable {
        return Err(DualError::Solver(SolverError::NumericalFailure(format!(
            "membership problem ended with status {:?} after {} iterations",
            res.status, res.iterations
        ))));
    }
    let mut x = res.x.rows(0, m).into_owned();
    let mut alpha = res.x[m].clamp(0.0, ALPHA_CAP);
    let gap = |x: &DVector<f64>, alpha: f64| {
        let mut z = b_hat.scaled(alpha).sub(&s_hat);
        for (xj, aj) in x.iter().zip(&p.a) {
            z.axpy(-xj, aj);
        }
        z
    };
    let mut violation = gap(&x, alpha).cone_violation();
    if violation > tol {
        if let Some((px, pa)) = polish_membership(p, &b_hat, &s_hat, &x, alpha) {
            let v = gap(&px, pa).cone_violation();
            if v < violation {
                (x, alpha, violation) = (px, pa, v);
            }
        }
    }
    Ok(Membership {
        member: violation <= tol,
        violation,
        alpha: alpha / if bnorm > 0.0 { bnorm } else { 1.0 } * snorm,
        x: x * snorm,
    })
}

/// Restores `αb − Ax − s = WWᵀ` exactly from an approximate solution.
///
/// `W` starts from the clearly positive eigenpairs of the approximate gap;
/// the rank suggested by the eigenvalue gap is tried first, then smaller
/// ranks, then larger ones.
fn polish_membership(
    p: &ConicProgram,
    b: &YElement,
    s: &YElement,
    x0: &DVector<f64>,
    alpha0: f64,
) -> Option<(DVector<f64>, f64)> {
    let m = p.m();
    let a: Vec<YElement> = p.a.iter().map(lift_element).collect();
    let b = lift_element(b);
    let s = lift_element(s);
    let orders: Vec<usize> = b.blocks.iter().map(|blk| blk.kind().size()).collect();
    let mut z0 = b.scaled(alpha0).sub(&s);
    for (xj, aj) in x0.iter().zip(&a) {
        z0.axpy(-xj, aj);
    }
    let mut dirs = Vec::new();
    for (k, blk) in z0.blocks.iter().enumerate() {
        let eig = sym_eig(&symmetrize(blk.as_matrix()?)).ok()?;
        for (i, &l) in eig.values.iter().enumerate() {
            dirs.push((l, k, eig.vectors.column(i).into_owned()));
        }
    }
    dirs.sort_by(|d, e| e.0.total_cmp(&d.0));
    let top = dirs.first().map_or(0.0, |d| d.0).max(0.0);
    let usable = dirs.iter().filter(|d| d.0 > 1e-12 * top).count();
    let clear = dirs.iter().filter(|d| d.0 > 1e-3 * top).count();
    let scale = 1.0
        + alpha0
        + x0.iter()
            .zip(&a)
            .map(|(xj, aj)| xj.abs() * aj.norm())
            .sum::<f64>();
    let tri: usize = orders.iter().map(|n| n * (n + 1) / 2).sum();

    let attempt = |r: usize| -> Option<(DVector<f64>, f64)> {
        let cols: Vec<(usize, DVector<f64>)> = dirs[..r]
            .iter()
            .map(|(l, k, v)| (*k, v * l.sqrt()))
            .collect();
        let unpack = |theta: &DVector<f64>| -> Vec<DMatrix<f64>> {
            let mut w: Vec<DMatrix<f64>> = orders.iter().map(|&n| DMatrix::zeros(n, n)).collect();
            let mut pos = m + 1;
            for (k, c) in &cols {
                let c = theta.rows(pos, c.len());
                w[*k] += c * c.transpose();
                pos += c.len();
            }
            w
        };
        let residual = |theta: &DVector<f64>| -> DVector<f64> {
            let ww = unpack(theta);
            let mut out = Vec::with_capacity(tri);
            for (k, n) in orders.iter().enumerate() {
                for q in 0..*n {
                    for pp in 0..=q {
                        let mut acc = Compensated::new();
                        acc.add_product(theta[m], b.matrix(k)[(pp, q)]);
                        acc.add(-s.matrix(k)[(pp, q)]);
                        for (j, aj) in a.iter().enumerate() {
                            acc.add_product(-theta[j], aj.matrix(k)[(pp, q)]);
                        }
                        acc.add(-ww[k][(pp, q)]);
                        out.push(acc.value());
                    }
                }
            }
            DVector::from_vec(out)
        };
        let jacobian = |theta: &DVector<f64>| -> DMatrix<f64> {
            let mut jac = DMatrix::zeros(tri, theta.len());
            let mut row = 0;
            let mut offsets = Vec::new();
            let mut pos = m + 1;
            for (k, c) in &cols {
                offsets.push((*k, pos, c.len()));
                pos += c.len();
            }
            for (k, n) in orders.iter().enumerate() {
                for q in 0..*n {
                    for pp in 0..=q {
                        for (j, aj) in a.iter().enumerate() {
                            jac[(row, j)] = -aj.matrix(k)[(pp, q)];
                        }
                        jac[(row, m)] = b.matrix(k)[(pp, q)];
                        for &(kc, off, len) in &offsets {
                            if kc != k {
                                continue;
                            }
                            let c = theta.rows(off, len);
                            jac[(row, off + pp)] -= c[q];
                            jac[(row, off + q)] -= c[pp];
                        }
                        row += 1;
                    }
                }
            }
            jac
        };
        let mut theta = DVector::zeros(m + 1 + cols.iter().map(|c| c.1.len()).sum::<usize>());
        theta.rows_mut(0, m).copy_from(x0);
        theta[m] = alpha0;
        let mut pos = m + 1;
        for (_, c) in &cols {
            theta.rows_mut(pos, c.len()).copy_from(c);
            pos += c.len();
        }
        let res = levenberg_marquardt(&mut theta, residual, jacobian, 500);
        let alpha = theta[m];
        (res.amax() <= 1e-12 * scale && (0.0..=ALPHA_CAP).contains(&alpha))
            .then(|| (theta.rows(0, m).into_owned(), alpha))
    };
    let clear = clear.clamp(usable.min(1), usable);
    (1..=clear)
        .rev()
        .chain(clear + 1..=usable)
        .chain(std::iter::once(0))
        .find_map(attempt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{lp_example, sdp_example, sdp_example_decomposition};

    fn sym3(v: [f64; 9]) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &v)
    }

    /// A hand-built certificate for the SDP example with `ℓ = 2`.
    fn hand_point() -> ExtendedDualPoint {
        let zero = YElement::from_matrix(DMatrix::zeros(3, 3));
        let dec = sdp_example_decomposition();
        let v3 = sym3([0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        ExtendedDualPoint {
            u: vec![
                zero.clone(),
                dec[0].0.clone(),
                dec[1].0.clone(),
                zero.clone(),
            ],
            v: vec![
                zero.clone(),
                dec[0].1.clone(),
                dec[1].1.clone(),
                YElement::from_matrix(v3),
            ],
            w: vec![
                vec![],
                vec![DMatrix::zeros(3, 3)],
                vec![sym3([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0])],
                vec![sym3([0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0])],
            ],
            beta: vec![0.0, 0.0, 1.0, 0.125],
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
    }

    #[test]
    fn hand_certificate_passes_every_variant() {
        let p = sdp_example();
        for variant in Variant::ALL {
            let r = check_extended_point(&p, &hand_point(), variant, 1e-12);
            assert!(r.passed(), "{variant}:\n{r}");
            assert_eq!(r.objective, 0.0);
            assert!(r.a_residual <= 1e-12);
        }
    }

    #[test]
    fn hand_certificate_schur_complement_by_hand() {
        // base diag(0,2,1) minus w wᵀ/β = diag(0, 2 − 1/4/β, 1) is psd iff β ≥ 1/8
        let pt = hand_point();
        let w = &pt.w[3][0];
        let base = sym3([0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let schur = &base - w * w.transpose() / 0.125;
        assert!((schur[(1, 1)]).abs() < 1e-15);
        assert!(min_eigenvalue(&schur_block(&base, w, 0.125)) >= -1e-15);
        assert!(min_eigenvalue(&schur_block(&base, w, 0.1)) < 0.0);
    }

    #[test]
    fn hand_certificate_without_witnesses_uses_pattern() {
        let p = sdp_example();
        let mut pt = hand_point();
        pt.w = vec![vec![]; 4];
        let r = check_extended_point(&p, &pt, Variant::Star, 1e-10);
        assert!(r.passed(), "{r}");
        assert!(r.checks.iter().any(|c| c.name == "tangent (pattern)"));
    }

    #[test]
    fn broken_u_fails_psd_check() {
        let p = sdp_example();
        let mut pt = hand_point();
        pt.u[2] = YElement::from_matrix(sym3([0.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0]));
        let r = check_extended_point(&p, &pt, Variant::Star, 1e-10);
        assert!(r.failed("u psd"));
    }

    #[test]
    fn off_pattern_v_fails_tangent_check() {
        let p = sdp_example();
        let mut pt = hand_point();
        pt.v[3] = YElement::from_matrix(sym3([1.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]));
        pt.w[3].clear();
        let r = check_extended_point(&p, &pt, Variant::Star, 1e-10);
        assert!(r.failed("tangent (pattern)"));
    }

    #[test]
    fn zero_point_is_feasible_when_c_vanishes() {
        let mut p = sdp_example();
        p.c = DVector::zeros(2);
        let zero = YElement::zeros(&p.blocks);
        let pt = ExtendedDualPoint {
            u: vec![zero.clone(); 3],
            v: vec![zero; 3],
            w: vec![vec![]; 3],
            beta: vec![0.0; 3],
        };
        let r = check_extended_point(&p, &pt, Variant::Simple, 1e-12);
        assert!(r.passed(), "{r}");
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn layout_covers_every_block_once() {
        let p = sdp_example();
        for variant in Variant::ALL {
            let prog = build_extended_dual(&p, variant, Some(2)).unwrap();
            let mut seen = vec![false; prog.program.blocks.len()];
            let all = prog
                .layout
                .u
                .iter()
                .chain(&prog.layout.z)
                .flatten()
                .copied()
                .chain(prog.layout.v.iter().flatten().copied());
            for b in all {
                assert!(!seen[b]);
                seen[b] = true;
            }
            assert!(seen.iter().all(|&s| s));
            assert_eq!(prog.layout.slots.len(), seen.len());
            assert_eq!(prog.layout.ell(), 2);
        }
    }

    #[test]
    fn hand_point_satisfies_the_encoded_equations() {
        // place the hand point into the encoded variables and check every row
        let p = sdp_example();
        let pt = hand_point();
        for variant in Variant::ALL {
            let prog = build_extended_dual(&p, variant, Some(2)).unwrap();
            let lay = &prog.layout;
            let mut y = YElement::zeros(&prog.program.blocks);
            for i in 1..=3 {
                y.blocks[lay.u[i][0]] = pt.u[i].blocks[0].clone();
                if i >= 2 {
                    let mut base = DMatrix::zeros(3, 3);
                    for j in variant.base(i) {
                        base += pt.u[j].matrix(0);
                    }
                    let beta = if variant.free_beta() { pt.beta[i] } else { 1.0 };
                    y.blocks[lay.z[i][0]] =
                        BlockValue::Matrix(schur_block(&base, &pt.w[i][0], beta));
                    if let Some(vb) = lay.v[i] {
                        let v = pt.v[i].matrix(0);
                        let d = lay.tri_len;
                        let mut x = DVector::zeros(2 * d);
                        for q in 0..3 {
                            for pp in 0..=q {
                                let e = lay.tri(0, pp, q);
                                x[e] = v[(pp, q)].max(0.0);
                                x[d + e] = (-v[(pp, q)]).max(0.0);
                            }
                        }
                        y.blocks[vb] = BlockValue::Vector(x);
                    }
                }
            }
            let r = prog.program.adjoint(&y).unwrap() - &prog.program.c;
            assert!(r.amax() < 1e-14, "{variant}: {r}");
            assert_eq!(prog.program.b.dot(&y), 0.0);
            assert!(y.cone_violation() <= 1e-15);
        }
    }

    #[test]
    fn sdp_example_extended_duals_attain_zero() {
        let p = sdp_example();
        for variant in Variant::ALL {
            let prog = build_extended_dual(&p, variant, Some(2)).unwrap();
            let ext = solve_extended_dual(&prog, &FraOptions::default())
                .unwrap()
                .dual;
            assert!(ext.value.abs() <= 1e-5, "{variant}: {}", ext.value);
            let y = ext.y.matrix(0);
            assert!(y[(0, 0)].abs() <= 1e-6, "{variant}: {y}");
            assert!((2.0 * y[(0, 1)] - 1.0).abs() <= 1e-6, "{variant}: {y}");
            let r = check_extended_point(&p, &ext.point, variant, 1e-7);
            assert!(r.passed(), "{variant}:\n{r}");
        }
    }

    #[test]
    fn zero_depth_is_the_standard_dual() {
        let p = lp_example();
        let prog = build_extended_dual(&p, Variant::Star, Some(0)).unwrap();
        assert_eq!(prog.program.blocks.len(), 1);
        assert_eq!(prog.program.m(), p.m());
        // the constructive solve needs room for the chain, the direct one does not
        assert!(solve_extended_dual(&prog, &FraOptions::default()).is_err());
        let direct = solve_conic_lp(&prog.program, &SolverOptions::default());
        let ext = extract_dual_solution(&prog, &direct).unwrap();
        let std = solve_conic_lp(&p, &SolverOptions::default());
        assert!((ext.value - std.dual_obj).abs() <= 1e-6);
        assert!(ext.y.matches(&p.blocks));
    }

    #[test]
    fn lp_extended_dual_value_matches_primal() {
        let p = lp_example();
        let prog = build_extended_dual(&p, Variant::Star, None).unwrap();
        let ext = solve_extended_dual(&prog, &FraOptions::default())
            .unwrap()
            .dual;
        assert!(ext.value.abs() <= 1e-6, "{}", ext.value);
    }

    #[test]
    fn membership_on_the_sdp_example() {
        let p = sdp_example();
        let e = |i: usize| {
            let mut m = DMatrix::zeros(3, 3);
            m[(i, i)] = 1.0;
            YElement::from_matrix(m)
        };
        assert!(fmin_membership(&p, &e(0), 1e-6).unwrap());
        assert!(!fmin_membership(&p, &e(1), 1e-6).unwrap());
        assert!(fmin_membership(&p, &YElement::zeros(&p.blocks), 1e-6).unwrap());
    }

    #[test]
    fn membership_on_the_lp_example() {
        let p = lp_example();
        let e = |i: usize| {
            let mut v = DVector::zeros(5);
            v[i] = 1.0;
            YElement::from_vector(v)
        };
        assert!(fmin_membership(&p, &e(0), 1e-6).unwrap());
        for i in 1..5 {
            assert!(!fmin_membership(&p, &e(i), 1e-6).unwrap(), "e_{i}");
        }
    }
}
