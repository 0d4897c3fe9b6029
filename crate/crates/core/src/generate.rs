//! Seeded random programs whose minimal cone is known by construction.
//!
//! Each block is split into groups `F, G_1, …, G_d` in a random orthonormal
//! basis (a random permutation for orthant blocks). The certificate `y_j` is
//! positive definite on `G_j`, vanishes on `F ∪ G_{j+1} ∪ … ∪ G_d` and is
//! arbitrary where it touches `G_1, …, G_{j−1}`. The data `a_i` are projected
//! orthogonally to every `y_j` and `b = z_0 + A x_0` with `z_0 ∈ ri F`, so the
//! `y_j` form a reducing chain and `F` is exactly the minimal cone.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::faces::{BlockFace, FaceRep};
use crate::linalg::{null_space, sym_pinv, symmetrize};
use crate::model::{BlockValue, ConeBlock, ConicProgram, YElement};

/// Shape of a generated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub blocks: Vec<ConeBlock>,
    pub m: usize,
    /// Number of certificates `y_1, …, y_d` planted in the data.
    pub depth: usize,
}

impl GeneratorConfig {
    /// A random shape with block orders at most `max_n` and at most `max_m` variables.
    pub fn random(rng: &mut impl Rng, max_n: usize, max_m: usize) -> Self {
        let nblocks = rng.random_range(1..=2);
        let blocks = (0..nblocks)
            .map(|_| {
                let n = rng.random_range(2..=max_n.max(2));
                if rng.random_bool(0.6) {
                    ConeBlock::Psd(n)
                } else {
                    ConeBlock::Orthant(n)
                }
            })
            .collect();
        Self {
            blocks,
            m: rng.random_range(1..=max_m.max(1)),
            depth: rng.random_range(0..=2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegenerateInstance {
    pub program: ConicProgram,
    /// The minimal cone.
    pub face: FaceRep,
    /// A point with `b − A x_0 ∈ ri F_min`.
    pub x0: DVector<f64>,
    /// The planted chain `y_1, …, y_d`.
    pub certificates: Vec<YElement>,
}

/// Group label per coordinate: `0` for `F`, `j` for `G_j`.
fn labels(rng: &mut impl Rng, cfg: &GeneratorConfig) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = cfg
        .blocks
        .iter()
        .map(|b| {
            (0..b.size())
                .map(|_| rng.random_range(0..=cfg.depth))
                .collect()
        })
        .collect();
    // F nonempty in block 0, every level present somewhere
    let mut slots: Vec<(usize, usize)> = out
        .iter()
        .enumerate()
        .flat_map(|(k, l)| (0..l.len()).map(move |i| (k, i)))
        .collect();
    slots.shuffle(rng);
    let first0 = slots
        .iter()
        .position(|&(k, _)| k == 0)
        .expect("block 0 nonempty");
    let (k0, i0) = slots.remove(first0);
    out[k0][i0] = 0;
    for j in 1..=cfg.depth {
        let present = out.iter().enumerate().any(|(k, l)| {
            l.iter()
                .enumerate()
                .any(|(i, &g)| g == j && (k, i) != (k0, i0))
        });
        if !present {
            if let Some((k, i)) = slots.pop() {
                out[k][i] = j;
            }
        }
    }
    out
}

fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

fn random_pd(rng: &mut impl Rng, r: usize) -> DMatrix<f64> {
    let w = DMatrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0));
    &w * w.transpose() / r as f64 + DMatrix::identity(r, r) * 0.5
}

/// Builds an instance of the given shape. Levels that end up with no
/// coordinates are skipped, so the planted chain can be shorter than `depth`.
pub fn degenerate_instance_with(cfg: &GeneratorConfig, seed: u64) -> DegenerateInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = labels(&mut rng, cfg);
    // basis per block: rotation for PSD, permutation for orthant
    let bases: Vec<DMatrix<f64>> = cfg
        .blocks
        .iter()
        .map(|b| match b {
            ConeBlock::Psd(n) => random_orthogonal(&mut rng, *n),
            ConeBlock::Orthant(n) => {
                let mut perm: Vec<usize> = (0..*n).collect();
                perm.shuffle(&mut rng);
                DMatrix::from_fn(*n, *n, |i, j| if perm[j] == i { 1.0 } else { 0.0 })
            }
        })
        .collect();

    let group = |k: usize, j: usize| -> Vec<usize> {
        labels[k]
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == j)
            .map(|(i, _)| i)
            .collect()
    };

    let mut certificates = Vec::new();
    for j in 1..=cfg.depth {
        let mut any = false;
        let blocks = cfg
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let n = b.size();
                let gj = group(k, j);
                any |= !gj.is_empty();
                let earlier = |i: usize| labels[k][i] >= 1 && labels[k][i] < j;
                let mut m = DMatrix::zeros(n, n);
                let pd = random_pd(&mut rng, gj.len());
                for (p, &r) in gj.iter().enumerate() {
                    for (q, &s) in gj.iter().enumerate() {
                        m[(r, s)] = pd[(p, q)];
                    }
                }
                match b {
                    ConeBlock::Psd(_) => {
                        for r in 0..n {
                            for s in r..n {
                                if earlier(r) || earlier(s) {
                                    let v = rng.random_range(-1.0..1.0);
                                    m[(r, s)] = v;
                                    m[(s, r)] = v;
                                }
                            }
                        }
                        BlockValue::Matrix(symmetrize(&(&bases[k] * m * bases[k].transpose())))
                    }
                    ConeBlock::Orthant(_) => {
                        for r in 0..n {
                            if earlier(r) {
                                m[(r, r)] = rng.random_range(-1.0..1.0);
                            }
                        }
                        BlockValue::Vector(&bases[k] * m.diagonal())
                    }
                }
            })
            .collect();
        if any {
            certificates.push(YElement { blocks });
        }
    }

    let face = FaceRep {
        blocks: cfg
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let f = group(k, 0);
                match b {
                    ConeBlock::Psd(n) => BlockFace::Psd {
                        n: *n,
                        basis: bases[k].select_columns(&f),
                    },
                    ConeBlock::Orthant(n) => {
                        let mut support: Vec<usize> =
                            f.iter().map(|&i| bases[k].column(i).imax()).collect();
                        support.sort_unstable();
                        BlockFace::Orthant { dim: *n, support }
                    }
                }
            })
            .collect(),
    };

    let z0 = {
        let inner = YElement {
            blocks: face
                .compressed_structure()
                .iter()
                .map(|b| match b {
                    ConeBlock::Psd(r) => BlockValue::Matrix(random_pd(&mut rng, *r)),
                    ConeBlock::Orthant(r) => {
                        BlockValue::Vector(DVector::from_fn(*r, |_, _| rng.random_range(0.5..1.5)))
                    }
                })
                .collect(),
        };
        face.expand(&inner)
    };

    let random_element = |rng: &mut ChaCha8Rng| YElement {
        blocks: cfg
            .blocks
            .iter()
            .map(|b| match b {
                ConeBlock::Psd(n) => {
                    BlockValue::Matrix(symmetrize(&DMatrix::from_fn(*n, *n, |_, _| {
                        rng.random_range(-1.0..1.0)
                    })))
                }
                ConeBlock::Orthant(n) => {
                    BlockValue::Vector(DVector::from_fn(*n, |_, _| rng.random_range(-1.0..1.0)))
                }
            })
            .collect(),
    };
    let gram = DMatrix::from_fn(certificates.len(), certificates.len(), |i, j| {
        certificates[i].dot(&certificates[j])
    });
    let gram_inv = sym_pinv(&gram, 1e-12);
    let a: Vec<YElement> = (0..cfg.m)
        .map(|_| {
            let mut ai = random_element(&mut rng);
            let coeffs = &gram_inv
                * DVector::from_iterator(
                    certificates.len(),
                    certificates.iter().map(|y| y.dot(&ai)),
                );
            for (c, y) in coeffs.iter().zip(&certificates) {
                ai.axpy(-c, y);
            }
            ai
        })
        .collect();
    let x0 = DVector::from_fn(cfg.m, |_, _| rng.random_range(-1.0..1.0));
    let mut b = z0;
    for (xi, ai) in x0.iter().zip(&a) {
        b.axpy(*xi, ai);
    }
    let yc = {
        let mut y = YElement::identity(&cfg.blocks);
        let r = random_element(&mut rng);
        y.axpy(0.3, &r);
        y
    };
    let c = DVector::from_iterator(cfg.m, a.iter().map(|ai| ai.dot(&yc)));
    let program = ConicProgram::new(format!("degenerate-{seed}"), cfg.blocks.clone(), a, b, c)
        .expect("generated data matches its structure");
    DegenerateInstance {
        program,
        face,
        x0,
        certificates,
    }
}

/// An instance with a random shape (block orders ≤ 6, at most 8 variables).
pub fn degenerate_instance(seed: u64) -> DegenerateInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let cfg = GeneratorConfig::random(&mut rng, 6, 8);
    degenerate_instance_with(&cfg, seed)
}

/// Feasible slacks `b − A x` for `x` drawn around `x_0` inside the feasible set.
pub fn sample_feasible_slacks(inst: &DegenerateInstance, count: usize, seed: u64) -> Vec<YElement> {
    let p = &inst.program;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = p.ambient_dim();
    let mut pa = DMatrix::zeros(d, p.m());
    for (i, a) in p.a.iter().enumerate() {
        pa.set_column(i, &inst.face.project_complement(a).to_svec());
    }
    let dirs = null_space(&pa, 1e-10);
    let s0 = p.slack(inst.x0.as_slice()).expect("length m");
    let margin = inst.face.interior_margin(&s0);
    (0..count)
        .map(|_| {
            if dirs.ncols() == 0 {
                return s0.clone();
            }
            let coef = DVector::from_fn(dirs.ncols(), |_, _| rng.random_range(-1.0..1.0));
            let step = &dirs * coef;
            let ad = p.apply(step.as_slice()).expect("length m");
            let t = 0.5 * margin / ad.norm().max(1e-12) * rng.random_range(0.0..1.0);
            p.slack((&inst.x0 + step * t).as_slice()).expect("length m")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faces::intersect_with_hyperplane;

    #[test]
    fn planted_chain_cuts_down_to_the_face() {
        for seed in 0..40 {
            let inst = degenerate_instance(seed);
            let p = &inst.program;
            let mut face = FaceRep::full(&p.blocks);
            for y in &inst.certificates {
                assert!(p.adjoint(y).unwrap().amax() < 1e-10);
                assert!(p.b.dot(y).abs() < 1e-10);
                let next = intersect_with_hyperplane(&face, y, 1e-9).unwrap();
                assert!(next.dim() < face.dim(), "seed {seed}");
                face = next;
            }
            assert!(face.approx_eq(&inst.face, 1e-8), "seed {seed}");
        }
    }

    #[test]
    fn x0_is_strictly_feasible_for_the_face() {
        for seed in 0..40 {
            let inst = degenerate_instance(seed);
            let s = inst.program.slack(inst.x0.as_slice()).unwrap();
            assert!(inst.face.project_complement(&s).max_abs() < 1e-10);
            assert!(inst.face.interior_margin(&s) > 0.1);
        }
    }

    #[test]
    fn sampled_slacks_are_feasible() {
        let inst = degenerate_instance(5);
        for s in sample_feasible_slacks(&inst, 10, 1) {
            assert!(s.cone_violation() < 1e-10);
            assert!(inst.face.contains(&s, 1e-9));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(degenerate_instance(11), degenerate_instance(11));
    }
}
