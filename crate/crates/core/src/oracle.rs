//! Brute-force reference implementations on small dimensions.
//!
//! Everything here is written as explicit scalar loops over the model sums
//! and shares no code with the fast paths it checks, apart from the matrix
//! containers and random draws.

use crate::channel::Schedule;
use crate::config::{Protocol, SystemConfig};
use crate::error::Result;
use crate::linalg::{
    fro_norm, khatri_rao, kron, pinv, vec, CMatrix, CTensor3, C64, DEFAULT_PINV_REL_TOL,
};
use crate::protocols::{synthesize, ObservationTensor};
use crate::receivers::{
    npf_build_btotal, npf_build_wg, npf_build_wh, pf_build_btotal, pf_build_wg, pf_build_wh,
};
use crate::rng::{complex_gaussian_matrix, rng_from_seed, SimRng};

/// `y[i·M + m, t, p] = Σ_{n,r,k} S_i[m,n] H[n,r] θ[i,r] G[r,k] C[p,k] X[k,t]`.
pub fn synth_p1_loops(h: &CMatrix, g: &CMatrix, sched: &Schedule, x: &CMatrix) -> CTensor3 {
    let (n_ports, nr) = h.shape();
    let (k_users, t_len) = x.shape();
    let blocks = sched.selections.len();
    let m_act = sched.selections[0].nrows();
    let slots = sched.coding.nrows();
    let mut out = CTensor3::zeros(blocks * m_act, t_len, slots);
    for (p, slice) in out.slices_mut().iter_mut().enumerate() {
        for i in 0..blocks {
            let s = &sched.selections[i];
            for m in 0..m_act {
                for t in 0..t_len {
                    let mut acc = C64::new(0.0, 0.0);
                    for n in 0..n_ports {
                        for r in 0..nr {
                            for k in 0..k_users {
                                acc += s[(m, n)]
                                    * h[(n, r)]
                                    * sched.theta[(i, r)]
                                    * g[(r, k)]
                                    * sched.coding[(p, k)]
                                    * x[(k, t)];
                            }
                        }
                    }
                    slice[(i * m_act + m, t)] = acc;
                }
            }
        }
    }
    out
}

/// `y[m, t, i] = Σ_{n,r,k} S_i[m,n] H[n,r] θ[i,r] G[r,k] C[i,k] X[k,t]`.
pub fn synth_p2_loops(h: &CMatrix, g: &CMatrix, sched: &Schedule, x: &CMatrix) -> CTensor3 {
    let (n_ports, nr) = h.shape();
    let (k_users, t_len) = x.shape();
    let m_act = sched.selections[0].nrows();
    let mut out = CTensor3::zeros(m_act, t_len, sched.selections.len());
    for (i, slice) in out.slices_mut().iter_mut().enumerate() {
        let s = &sched.selections[i];
        for m in 0..m_act {
            for t in 0..t_len {
                let mut acc = C64::new(0.0, 0.0);
                for n in 0..n_ports {
                    for r in 0..nr {
                        for k in 0..k_users {
                            acc += s[(m, n)]
                                * h[(n, r)]
                                * sched.theta[(i, r)]
                                * g[(r, k)]
                                * sched.coding[(i, k)]
                                * x[(k, t)];
                        }
                    }
                }
                slice[(m, t)] = acc;
            }
        }
    }
    out
}

pub fn synth_loops(
    protocol: Protocol,
    h: &CMatrix,
    g: &CMatrix,
    sched: &Schedule,
    x: &CMatrix,
) -> CTensor3 {
    match protocol {
        Protocol::P1 => synth_p1_loops(h, g, sched, x),
        Protocol::P2 => synth_p2_loops(h, g, sched, x),
    }
}

/// Entries in slice-major, column-major order.
fn flatten(y: &CTensor3) -> Vec<C64> {
    let (d1, d2, _) = y.dims();
    let mut out = Vec::with_capacity(y.len());
    for s in y.slices() {
        for c in 0..d2 {
            for r in 0..d1 {
                out.push(s[(r, c)]);
            }
        }
    }
    out
}

/// P1 data regrouped per block as `vec([Y_{i,1}, …, Y_{i,P}])`.
fn flatten_p1_blocks(y: &CTensor3, m_act: usize) -> Vec<C64> {
    let (d1, t_len, slots) = y.dims();
    let mut out = Vec::with_capacity(y.len());
    for i in 0..d1 / m_act {
        for p in 0..slots {
            for t in 0..t_len {
                for m in 0..m_act {
                    out.push(y.slice(p)[(i * m_act + m, t)]);
                }
            }
        }
    }
    out
}

fn unit(rows: usize, cols: usize, j: usize) -> CMatrix {
    let mut e = CMatrix::zeros(rows, cols);
    e[(j % rows, j / rows)] = C64::new(1.0, 0.0);
    e
}

fn max_diff(a: &CMatrix, b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest deviation between a regression matrix and the linear map it
/// should represent, probed one unit vector at a time through the loop
/// oracle. Returns `(wg, wh, btotal)` errors.
pub fn builder_deviation(protocol: Protocol, sched: &Schedule, h: &CMatrix, g: &CMatrix, x: &CMatrix) -> Result<[f64; 3]> {
    let (n, nr) = h.shape();
    let k = g.ncols();
    let m_act = sched.selections[0].nrows();
    let (wg, wh, bt) = match protocol {
        Protocol::P1 => (
            pf_build_wg(sched, h, x)?,
            pf_build_wh(sched, g, x)?,
            pf_build_btotal(sched, g, h)?,
        ),
        Protocol::P2 => (
            npf_build_wg(sched, h, x)?,
            npf_build_wh(sched, g, x)?,
            npf_build_btotal(sched, g, h)?,
        ),
    };

    let mut dev_g = if wg.ncols() == nr * k { 0.0 } else { f64::INFINITY };
    for j in 0..wg.ncols().min(nr * k) {
        let y = synth_loops(protocol, h, &unit(nr, k, j), sched, x);
        dev_g = f64::max(dev_g, max_diff(&wg.columns(j, 1).into_owned(), &flatten(&y)));
    }

    let mut dev_h = if wh.ncols() == n * nr { 0.0 } else { f64::INFINITY };
    for j in 0..wh.ncols().min(n * nr) {
        let y = synth_loops(protocol, &unit(n, nr, j), g, sched, x);
        let target = match protocol {
            Protocol::P1 => flatten_p1_blocks(&y, m_act),
            Protocol::P2 => flatten(&y),
        };
        dev_h = f64::max(dev_h, max_diff(&wh.columns(j, 1).into_owned(), &target));
    }

    // Column k of B_total is the stacked response to user k alone.
    let mut dev_b = if bt.ncols() == k { 0.0 } else { f64::INFINITY };
    for j in 0..bt.ncols().min(k) {
        let y = synth_loops(protocol, h, g, sched, &unit(k, 1, j));
        dev_b = f64::max(dev_b, max_diff(&bt.columns(j, 1).into_owned(), &flatten(&y)));
    }
    Ok([dev_g, dev_h, dev_b])
}

/// Result of one brute-force check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

impl std::fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<44} max error {:.3e} (tol {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.max_error,
            self.tolerance
        )
    }
}

fn check(name: impl Into<String>, max_error: f64, tolerance: f64) -> OracleCheck {
    OracleCheck {
        name: name.into(),
        max_error,
        tolerance,
    }
}

fn kron_loops(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

fn matmul_loops(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.nrows(), b.ncols(), |r, c| {
        (0..a.ncols()).map(|k| a[(r, k)] * b[(k, c)]).sum()
    })
}

fn max_abs(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn rand(rows: usize, cols: usize, rng: &mut SimRng) -> CMatrix {
    complex_gaussian_matrix(rows, cols, 1.0, rng)
}

/// The vec/Kronecker, mixed-product and Khatri-Rao identities, each over
/// `instances` random complex draws, plus the four Penrose conditions on
/// tall, wide, square and rank-deficient matrices.
pub fn identity_checks(instances: usize, seed: u64) -> Vec<OracleCheck> {
    let mut rng = rng_from_seed(seed);
    let (mut e1, mut e2, mut e3) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..instances {
        // vec(ABC) = (Cᵀ ⊗ A) vec(B)
        let (a, b, c) = (rand(2, 3, &mut rng), rand(3, 2, &mut rng), rand(2, 4, &mut rng));
        let lhs = vec(&matmul_loops(&matmul_loops(&a, &b), &c));
        e1 = e1.max(max_abs(&lhs, &(kron(&c.transpose(), &a) * vec(&b))));

        // (A ⊗ B)(C ⊗ D) = AC ⊗ BD
        let (a, b, c, d) = (
            rand(2, 2, &mut rng),
            rand(2, 2, &mut rng),
            rand(2, 2, &mut rng),
            rand(2, 2, &mut rng),
        );
        let lhs = matmul_loops(&kron_loops(&a, &b), &kron_loops(&c, &d));
        e2 = e2.max(max_abs(&lhs, &kron(&(&a * &c), &(&b * &d))));

        // vec(A diag(x) B) = (Bᵀ ⋄ A) x
        let (a, b, x) = (rand(3, 2, &mut rng), rand(2, 4, &mut rng), rand(2, 1, &mut rng));
        let mut direct = CMatrix::zeros(3, 4);
        for r in 0..3 {
            for c in 0..4 {
                for k in 0..2 {
                    direct[(r, c)] += a[(r, k)] * x[(k, 0)] * b[(k, c)];
                }
            }
        }
        let kr = khatri_rao(&b.transpose(), &a).expect("matching columns");
        e3 = e3.max(max_abs(&vec(&direct), &(kr * &x)));
    }

    let mut penrose = 0.0f64;
    let shapes = [(8, 3, 3), (3, 7, 3), (5, 5, 5), (6, 5, 2)];
    for (rows, cols, rank) in shapes {
        for _ in 0..instances.clamp(1, 25) {
            let a = rand(rows, rank, &mut rng) * rand(rank, cols, &mut rng);
            let Ok(p) = pinv(&a, DEFAULT_PINV_REL_TOL).map(|p| p.matrix) else {
                penrose = f64::INFINITY;
                continue;
            };
            let ap = &a * &p;
            let pa = &p * &a;
            let scale = fro_norm(&a).max(fro_norm(&p)).max(1.0);
            let errs = [
                max_abs(&(&ap * &a), &a),
                max_abs(&(&pa * &p), &p),
                max_abs(&ap.adjoint(), &ap),
                max_abs(&pa.adjoint(), &pa),
            ];
            penrose = errs.iter().fold(penrose, |m, e| m.max(e / scale));
        }
    }

    vec![
        check("vec(ABC) = (C^T kron A) vec(B)", e1, 1e-12),
        check("(A kron B)(C kron D) = AC kron BD", e2, 1e-12),
        check("vec(A diag(x) B) = (B^T kr A) x", e3, 1e-12),
        check("pinv Penrose conditions", penrose, 1e-10),
    ]
}

fn small_scenario(protocol: Protocol, seed: u64) -> Result<(SystemConfig, crate::channel::Scenario)> {
    let cfg = match protocol {
        Protocol::P1 => SystemConfig::p1(2, 3, 2, 2, 2, 2, 3),
        Protocol::P2 => SystemConfig::p2(2, 3, 2, 2, 3, 3),
    };
    let sc = crate::channel::Scenario::generate(&cfg, &mut rng_from_seed(seed))?;
    Ok((cfg, sc))
}

/// Synthesis against the quadruple-loop sums on `(M, N, N_r, K) = (2, 3, 2, 2)`.
pub fn synthesis_checks(seed: u64) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for protocol in [Protocol::P1, Protocol::P2] {
        let mut worst = 0.0f64;
        for s in 0..10 {
            let (_, sc) = small_scenario(protocol, seed.wrapping_add(s))?;
            let (h, g, x) = (&sc.channels.h, &sc.channels.g, &sc.symbols.x);
            let fast = synthesize(protocol, h, g, &sc.schedule, x)?;
            let slow = synth_loops(protocol, h, g, &sc.schedule, x);
            let diff = flatten(&fast)
                .iter()
                .zip(flatten(&slow))
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(diff);
        }
        out.push(check(format!("synthesis {protocol} vs loop sums"), worst, 1e-12));
    }
    Ok(out)
}

/// Regression builders against the loop oracle (as linear maps), and the
/// noiseless ground-truth residuals of each regression.
pub fn builder_checks(seed: u64) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for protocol in [Protocol::P1, Protocol::P2] {
        let mut dev = [0.0f64; 3];
        let mut resid = [0.0f64; 3];
        for s in 0..10 {
            let (_, sc) = small_scenario(protocol, seed.wrapping_add(s))?;
            let (h, g, x) = (&sc.channels.h, &sc.channels.g, &sc.symbols.x);
            let d = builder_deviation(protocol, &sc.schedule, h, g, x)?;
            for (a, b) in dev.iter_mut().zip(d) {
                *a = a.max(b);
            }
            let r = ground_truth_residuals(protocol, &sc.schedule, h, g, x)?;
            for (a, b) in resid.iter_mut().zip(r) {
                *a = a.max(b);
            }
        }
        for (j, name) in ["W_G", "W_H", "B_total"].iter().enumerate() {
            out.push(check(format!("{protocol} {name} vs loop map"), dev[j], 1e-12));
            out.push(check(format!("{protocol} {name} noiseless residual"), resid[j], 1e-10));
        }
    }
    Ok(out)
}

/// `‖y − W_G vec(G)‖`, `‖y_H − W_H vec(H)‖` and `‖Y_stacked − B_total X‖`
/// with observations rebuilt by the loop oracle.
pub fn ground_truth_residuals(
    protocol: Protocol,
    sched: &Schedule,
    h: &CMatrix,
    g: &CMatrix,
    x: &CMatrix,
) -> Result<[f64; 3]> {
    let y = synth_loops(protocol, h, g, sched, x);
    let m_act = sched.selections[0].nrows();
    let col = |v: Vec<C64>| CMatrix::from_column_slice(v.len(), 1, &v);
    let y_vec = col(flatten(&y));
    let (wg, wh, bt, y_h) = match protocol {
        Protocol::P1 => (
            pf_build_wg(sched, h, x)?,
            pf_build_wh(sched, g, x)?,
            pf_build_btotal(sched, g, h)?,
            col(flatten_p1_blocks(&y, m_act)),
        ),
        Protocol::P2 => (
            npf_build_wg(sched, h, x)?,
            npf_build_wh(sched, g, x)?,
            npf_build_btotal(sched, g, h)?,
            y_vec.clone(),
        ),
    };
    // Y_stacked: slices on top of each other.
    let (d1, d2, d3) = y.dims();
    let stacked = CMatrix::from_fn(d1 * d3, d2, |r, c| y.slice(r / d1)[(r % d1, c)]);
    let r_x = fro_norm(&(stacked - bt * x));
    let r_g = fro_norm(&(&y_vec - wg * vec(g)));
    let r_h = fro_norm(&(y_h - wh * vec(h)));
    Ok([r_g, r_h, r_x])
}

/// Runs every brute-force check.
pub fn run_all(seed: u64) -> Result<Vec<OracleCheck>> {
    let mut out = identity_checks(100, seed);
    out.extend(synthesis_checks(seed)?);
    out.extend(builder_checks(seed)?);
    // The observation container round trip belongs with the data checks.
    let (_, sc) = small_scenario(Protocol::P2, seed)?;
    let (h, g, x) = (&sc.channels.h, &sc.channels.g, &sc.symbols.x);
    let obs = ObservationTensor::noiseless(Protocol::P2, synthesize(Protocol::P2, h, g, &sc.schedule, x)?);
    let mut buf = Vec::new();
    crate::protocols::write_observation(&obs, &mut buf)?;
    let back = crate::protocols::read_observation(&buf[..])?;
    let diff = flatten(&back.data)
        .iter()
        .zip(flatten(&obs.data))
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    out.push(check("observation file round trip", diff, 0.0));
    Ok(out)
}
