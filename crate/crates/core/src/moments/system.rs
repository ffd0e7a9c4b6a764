//! Assembly and RK4 integration of the moment ODE.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{MarkovianParams, MomentBlock, MomentError, MomentIndex, MomentTable, Result};
use crate::model::NetworkModel;

/// A lower-order moment entering the forcing of one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingTerm {
    pub coef: f64,
    pub order: u32,
    pub position: usize,
}

/// dX/dt = A X + C(t) over the order-n indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    pub order: u32,
    pub indices: Vec<MomentIndex>,
    pub matrix: DMatrix<f64>,
    /// forcing[row] lists the lower-order moments feeding that row
    pub forcing: Vec<Vec<ForcingTerm>>,
}

impl MomentSystem {
    /// Evaluate C given a lookup `lower(order, position)` of lower-order moments.
    pub fn forcing_at<F: Fn(u32, usize) -> f64>(&self, lower: F) -> Vec<f64> {
        self.forcing
            .iter()
            .map(|terms| terms.iter().map(|t| t.coef * lower(t.order, t.position)).sum())
            .collect()
    }
}

fn positions(d: usize, n: u32) -> HashMap<MomentIndex, usize> {
    MomentIndex::enumerate(d, n)
        .into_iter()
        .enumerate()
        .map(|(p, i)| (i, p))
        .collect()
}

fn binom(n: u32, k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * f64::from(n + 1 - i) / f64::from(i))
}

/// All l with 0 <= l <= g componentwise.
fn below(g: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &gl in g {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=gl).map(move |v| {
                    let mut p = p.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

pub(crate) fn assemble(p: &MarkovianParams, n: u32) -> MomentSystem {
    let d = p.d;
    let indices = MomentIndex::enumerate(d, n);
    let mut lookups: Vec<HashMap<MomentIndex, usize>> = (0..=n).map(|m| positions(d, m)).collect();
    let dim = indices.len();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut forcing = vec![Vec::new(); dim];
    let b = |k: usize, j: usize, power: u32| p.mark_moments[k][j][power as usize];
    for (row, idx) in indices.iter().enumerate() {
        let (q, g) = (&idx.q, &idx.g);
        let mut diag = 0.0;
        for j in 0..d {
            diag -= f64::from(g[j]) * p.r[j] + f64::from(q[j]) * p.mu[j];
            diag -= f64::from(q[j]) * (0..d).map(|i| p.mu_route[i][j]).sum::<f64>();
        }
        a[(row, row)] += diag;
        let shifted = |dq: &[i64], dg: &[i64]| MomentIndex {
            q: q.iter().zip(dq).map(|(x, y)| (i64::from(*x) + y) as u32).collect(),
            g: g.iter().zip(dg).map(|(x, y)| (i64::from(*x) + y) as u32).collect(),
        };
        let unit = |k: usize, s: i64| -> Vec<i64> { (0..d).map(|l| if l == k { s } else { 0 }).collect() };
        let zero = vec![0i64; d];
        for j in 0..d {
            // arrival into j: Q_j rises with rate Lambda_j
            if q[j] > 0 {
                let col = lookups[n as usize][&shifted(&unit(j, -1), &unit(j, 1))];
                a[(row, col)] += f64::from(q[j]);
            }
            // departure from j adds one mark to every Lambda_k
            if p.mu[j] > 0.0 {
                for k in 0..d {
                    if g[k] > 0 {
                        let col = lookups[n as usize][&shifted(&unit(j, 1), &unit(k, -1))];
                        a[(row, col)] += p.mu[j] * f64::from(g[k]) * b(k, j, 1);
                    }
                }
                let total_g: u32 = g.iter().sum();
                for l in below(g) {
                    let lsum: u32 = l.iter().sum();
                    if lsum + 2 > total_g {
                        continue;
                    }
                    let coef: f64 = (0..d).map(|k| binom(g[k], l[k]) * b(k, j, g[k] - l[k])).product();
                    if coef == 0.0 {
                        continue;
                    }
                    let target = MomentIndex {
                        q: q.iter().enumerate().map(|(k, v)| v + u32::from(k == j)).collect(),
                        g: l,
                    };
                    let order = target.order();
                    forcing[row].push(super::system::ForcingTerm {
                        coef: p.mu[j] * coef,
                        order,
                        position: lookups[order as usize][&target],
                    });
                }
            }
            // reroute j -> i
            for i in 0..d {
                let rate = p.mu_route[i][j];
                if i != j && rate > 0.0 && q[i] > 0 {
                    let mut dq = unit(j, 1);
                    dq[i] = -1;
                    let col = lookups[n as usize][&shifted(&dq, &zero)];
                    a[(row, col)] += rate * f64::from(q[i]);
                }
            }
            // relaxation of Lambda_j towards lambda0_j
            if g[j] > 0 && p.lambda0[j] > 0.0 {
                let target = shifted(&zero, &unit(j, -1));
                forcing[row].push(ForcingTerm {
                    coef: f64::from(g[j]) * p.r[j] * p.lambda0[j],
                    order: n - 1,
                    position: lookups[(n - 1) as usize][&target],
                });
            }
        }
    }
    lookups.clear();
    MomentSystem {
        order: n,
        indices,
        matrix: a,
        forcing,
    }
}

/// Build the order-n moment system of a Markovian delayed network.
pub fn assemble_moment_system(model: &NetworkModel, n: u32) -> Result<MomentSystem> {
    let p = MarkovianParams::from_model(model, n)?;
    Ok(assemble(&p, n))
}

/// Initial values: Q(0) = 0, Lambda(0) = lambda0.
fn initial(p: &MarkovianParams, indices: &[MomentIndex]) -> Vec<f64> {
    indices
        .iter()
        .map(|i| {
            if i.q.iter().any(|v| *v > 0) {
                0.0
            } else {
                i.g.iter().zip(&p.lambda0).map(|(g, l)| l.powi(*g as i32)).product()
            }
        })
        .collect()
}

/// Stored solution of one order on the internal grid: `values[pos][k]`, `derivs[pos][k]`.
struct Solved {
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
}

impl Solved {
    /// Cubic Hermite value between nodes k and k+1 at fraction theta.
    fn at(&self, pos: usize, k: usize, theta: f64, h: f64) -> f64 {
        let y = &self.values[pos];
        let dy = &self.derivs[pos];
        if theta == 0.0 || k + 1 >= y.len() {
            return y[k.min(y.len() - 1)];
        }
        let t2 = theta * theta;
        let t3 = t2 * theta;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y[k]
            + (t3 - 2.0 * t2 + theta) * h * dy[k]
            + (-2.0 * t3 + 3.0 * t2) * y[k + 1]
            + (t3 - t2) * h * dy[k + 1]
    }
}

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect()
}

/// Solve orders 1..=n_max with RK4 using 4096 steps over [0, max(times)].
pub fn solve_moments_transient(model: &NetworkModel, n_max: u32, times: &[f64]) -> Result<MomentTable> {
    solve_moments_transient_with(model, n_max, times, 4096)
}

/// As [`solve_moments_transient`] with an explicit number of RK4 steps.
pub fn solve_moments_transient_with(model: &NetworkModel, n_max: u32, times: &[f64], steps: usize) -> Result<MomentTable> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || steps == 0 {
        return Err(MomentError::InvalidArgument("times must be finite and nonnegative".into()));
    }
    let p = MarkovianParams::from_model(model, n_max)?;
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let h = horizon / steps as f64;
    let nodes = steps + 1;
    let mut solved: Vec<Solved> = vec![Solved {
        values: vec![vec![1.0; nodes]],
        derivs: vec![vec![0.0; nodes]],
    }];
    let mut blocks = vec![MomentBlock {
        indices: MomentIndex::enumerate(p.d, 0),
        values: vec![vec![1.0; times.len()]],
    }];
    for n in 1..=n_max {
        let sys = assemble(&p, n);
        let dim = sys.indices.len();
        let a: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| sys.matrix[(i, j)]).collect()).collect();
        let bound = a.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        if h * bound > 2.5 {
            return Err(MomentError::StiffSystem {
                step: h,
                suggested: 2.5 / bound,
            });
        }
        let forcing = |k: usize, theta: f64| -> Vec<f64> {
            sys.forcing_at(|order, pos| solved[order as usize].at(pos, k, theta, h))
        };
        let mut values = vec![vec![0.0; nodes]; dim];
        let mut derivs = vec![vec![0.0; nodes]; dim];
        let mut x = initial(&p, &sys.indices);
        let rhs = |x: &[f64], c: &[f64]| -> Vec<f64> { matvec(&a, x).iter().zip(c).map(|(u, v)| u + v).collect() };
        let axpy = |x: &[f64], s: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| u + s * v).collect() };
        let mut c0 = forcing(0, 0.0);
        for k in 0..nodes {
            let k1 = rhs(&x, &c0);
            for i in 0..dim {
                values[i][k] = x[i];
                derivs[i][k] = k1[i];
            }
            if k + 1 == nodes {
                break;
            }
            let cm = forcing(k, 0.5);
            let c1 = forcing(k + 1, 0.0);
            let k2 = rhs(&axpy(&x, 0.5 * h, &k1), &cm);
            let k3 = rhs(&axpy(&x, 0.5 * h, &k2), &cm);
            let k4 = rhs(&axpy(&x, h, &k3), &c1);
            for i in 0..dim {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            c0 = c1;
        }
        let current = Solved { values, derivs };
        let out: Vec<Vec<f64>> = (0..dim)
            .map(|pos| times.iter().map(|&t| interpolate(&current, pos, t, h)).collect())
            .collect();
        blocks.push(MomentBlock {
            indices: sys.indices.clone(),
            values: out,
        });
        solved.push(current);
    }
    Ok(MomentTable {
        times: times.to_vec(),
        orders: blocks,
    })
}

fn interpolate(s: &Solved, pos: usize, t: f64, h: f64) -> f64 {
    if h == 0.0 {
        return s.values[pos][0];
    }
    let x = t / h;
    let k = (x.floor() as usize).min(s.values[pos].len() - 1);
    s.at(pos, k, x - k as f64, h)
}

fn stirling2(n: u32, k: u32) -> f64 {
    let n = n as usize;
    let k = k as usize;
    let mut s = vec![vec![0.0; n + 1]; n + 1];
    s[0][0] = 1.0;
    for i in 1..=n {
        for j in 1..=i {
            s[i][j] = j as f64 * s[i - 1][j] + s[i - 1][j - 1];
        }
    }
    if k > n {
        0.0
    } else {
        s[n][k]
    }
}

/// Convert E[Q-falling^q Lambda^g] into raw moments E[Q^q Lambda^g].
pub fn factorial_to_raw(table: &MomentTable) -> MomentTable {
    let orders = table
        .orders
        .iter()
        .map(|block| {
            let values = block
                .indices
                .iter()
                .map(|idx| {
                    let mut acc = vec![0.0; table.times.len()];
                    for k in below(&idx.q) {
                        let w: f64 = idx.q.iter().zip(&k).map(|(q, k)| stirling2(*q, *k)).product();
                        if w == 0.0 {
                            continue;
                        }
                        let lower = MomentIndex {
                            q: k,
                            g: idx.g.clone(),
                        };
                        if let Some(series) = table.get(&lower) {
                            for (a, v) in acc.iter_mut().zip(series) {
                                *a += w * v;
                            }
                        }
                    }
                    acc
                })
                .collect();
            MomentBlock {
                indices: block.indices.clone(),
                values,
            }
        })
        .collect();
    MomentTable {
        times: table.times.clone(),
        orders,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExcitationMode, Kernel, MarkDistribution};

    fn reference() -> NetworkModel {
        NetworkModel::markovian(1.0, 2.0, MarkDistribution::Deterministic { value: 1.0 }, 1.0, ExcitationMode::Delayed)
    }

    #[test]
    fn order_one_matrix() {
        let sys = assemble_moment_system(&reference(), 1).unwrap();
        assert_eq!(sys.matrix, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -2.0]));
        assert_eq!(sys.forcing_at(|_, _| 1.0), vec![0.0, 2.0]);
        let sys0 = assemble_moment_system(&reference(), 0).unwrap();
        assert_eq!(sys0.matrix.nrows(), 1);
    }

    #[test]
    fn bivariate_dimension() {
        let s = crate::model::ServiceDistribution::Exponential { rate: 1.0 };
        let k = Kernel::exponential(2.0, 0.3);
        let m = NetworkModel {
            d: 2,
            lambda0: vec![1.0, 0.5],
            kernels: vec![vec![k.clone(), k.clone()], vec![k.clone(), k]],
            marks: vec![vec![MarkDistribution::Exponential { rate: 1.0 }; 2]; 2],
            services: vec![s.clone(), s],
            mu: vec![1.0, 1.0],
            mu_route: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            mode: ExcitationMode::Delayed,
            phi: None,
            service_semantics: None,
        };
        assert_eq!(assemble_moment_system(&m, 1).unwrap().matrix.nrows(), 4);
    }

    #[test]
    fn infinite_server_transient() {
        let mut m = reference();
        m.kernels[0][0] = Kernel::exponential(2.0, 0.0);
        let times = [0.5, 1.0, 3.0];
        let t = solve_moments_transient(&m, 2, &times).unwrap();
        let eq = t.get(&MomentIndex::new(vec![1], vec![0])).unwrap();
        for (v, s) in eq.iter().zip(times) {
            assert!((v - (1.0 - (-s).exp())).abs() < 1e-10);
        }
        // Poisson: second falling factorial moment is the squared mean
        let e2 = t.get(&MomentIndex::new(vec![2], vec![0])).unwrap();
        for (v, s) in e2.iter().zip(times) {
            assert!((v - (1.0 - (-s).exp()).powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_approaches_stationarity() {
        let t = solve_moments_transient(&reference(), 1, &[60.0]).unwrap();
        assert!((t.orders[1].values[0][0] - 2.0).abs() < 1e-8);
        assert!((t.orders[1].values[1][0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn raw_conversion() {
        let table = MomentTable {
            times: vec![0.0],
            orders: vec![
                MomentBlock {
                    indices: MomentIndex::enumerate(1, 0),
                    values: vec![vec![1.0]],
                },
                MomentBlock {
                    indices: MomentIndex::enumerate(1, 1),
                    values: vec![vec![3.0], vec![5.0]],
                },
                MomentBlock {
                    indices: MomentIndex::enumerate(1, 2),
                    values: vec![vec![7.0], vec![11.0], vec![13.0]],
                },
            ],
        };
        let raw = factorial_to_raw(&table);
        assert_eq!(raw.get(&MomentIndex::new(vec![1], vec![0])).unwrap()[0], 3.0);
        assert_eq!(raw.get(&MomentIndex::new(vec![2], vec![0])).unwrap()[0], 10.0);
        assert_eq!(raw.get(&MomentIndex::new(vec![1], vec![1])).unwrap()[0], 11.0);
    }

    #[test]
    fn stiff_step_reported() {
        let m = NetworkModel::markovian(1.0, 2000.0, MarkDistribution::Deterministic { value: 1.0 }, 1.0, ExcitationMode::Delayed);
        assert!(matches!(
            solve_moments_transient_with(&m, 1, &[10.0], 100),
            Err(MomentError::StiffSystem { .. })
        ));
    }
}
