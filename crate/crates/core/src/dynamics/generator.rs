use nalgebra::{DMatrix, DVector};

use super::rates::rates;
use crate::env::Landscape;
use crate::error::{Error, Result};

pub const MAX_GENERATOR_STATES: u64 = 4096;

/// Dense rate matrix of the full chain, for small systems.
#[derive(Debug, Clone)]
pub struct ExactGenerator {
    size: usize,
    /// Row-major off-diagonal rates; the diagonal is unused.
    w: Vec<f64>,
    log_gibbs: Vec<f64>,
}

pub fn exact_generator<L: Landscape + ?Sized>(env: &L) -> Result<ExactGenerator> {
    let d = env.derived();
    if d.states() > MAX_GENERATOR_STATES {
        return Err(Error::TooLarge {
            states: d.states(),
            max: MAX_GENERATOR_STATES,
        });
    }
    let size = d.states() as usize;
    let n = d.n();
    let mut w = vec![0.0; size * size];
    for sigma in 0..size {
        let r = rates(env, sigma as u64);
        let (r1, r2) = (r.r1(), r.r2());
        for bit in 0..n {
            let rate = if bit >= d.n2 { r1 } else { r2 };
            w[sigma * size + (sigma ^ (1 << bit))] = rate;
        }
    }
    let bsn = d.beta() * d.sqrt_n();
    let log_gibbs = (0..size as u64).map(|s| bsn * env.xi(s)).collect();
    Ok(ExactGenerator { size, w, log_gibbs })
}

impl ExactGenerator {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            0.0
        } else {
            self.w[from * self.size + to]
        }
    }

    /// `e^{β√N Ξ_σ} / Z`.
    pub fn gibbs(&self) -> Vec<f64> {
        let max = self
            .log_gibbs
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let un: Vec<f64> = self.log_gibbs.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = un.iter().sum();
        un.into_iter().map(|x| x / z).collect()
    }

    /// Stationary law by Grassmann-Taksar-Heyman elimination, which avoids
    /// subtractions and keeps every component to high relative accuracy.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.size;
        let mut a = self.w.clone();
        for k in (1..n).rev() {
            let s: f64 = a[k * n..k * n + k].iter().sum();
            for i in 0..k {
                a[i * n + k] /= s;
            }
            for i in 0..k {
                let aik = a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..k {
                    if j != i {
                        a[i * n + j] += aik * a[k * n + j];
                    }
                }
            }
        }
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        for j in 1..n {
            pi[j] = (0..j).map(|i| pi[i] * a[i * n + j]).sum();
        }
        let z: f64 = pi.iter().sum();
        pi.into_iter().map(|x| x / z).collect()
    }

    /// Largest relative gap between the stationary law and the Gibbs measure.
    pub fn gibbs_rel_err(&self) -> f64 {
        self.stationary()
            .iter()
            .zip(self.gibbs())
            .map(|(p, g)| (p - g).abs() / g)
            .fold(0.0, f64::max)
    }

    /// Largest relative asymmetry of the edge flows `π(σ)w(σ,σ')`.
    pub fn detailed_balance_err(&self) -> f64 {
        let g = self.gibbs();
        let mut worst = 0.0f64;
        for s in 0..self.size {
            for t in (s + 1)..self.size {
                let (a, b) = (g[s] * self.rate(s, t), g[t] * self.rate(t, s));
                if a > 0.0 || b > 0.0 {
                    worst = worst.max((a - b).abs() / a.max(b));
                }
            }
        }
        worst
    }

    /// Mean time to reach `targets` from every state.
    pub fn mean_hitting_times(&self, targets: &[usize]) -> Result<Vec<f64>> {
        if targets.is_empty() || targets.iter().any(|&t| t >= self.size) {
            return Err(Error::InvalidParams(
                "targets must be nonempty valid states".into(),
            ));
        }
        let mut is_target = vec![false; self.size];
        for &t in targets {
            is_target[t] = true;
        }
        let free: Vec<usize> = (0..self.size).filter(|&s| !is_target[s]).collect();
        let mut pos = vec![usize::MAX; self.size];
        for (i, &s) in free.iter().enumerate() {
            pos[s] = i;
        }
        let m = free.len();
        let mut mat = DMatrix::<f64>::zeros(m, m);
        let rhs = DVector::<f64>::from_element(m, 1.0);
        for (i, &s) in free.iter().enumerate() {
            let mut out = 0.0;
            for t in 0..self.size {
                let r = self.rate(s, t);
                if r == 0.0 {
                    continue;
                }
                out += r;
                if !is_target[t] {
                    mat[(i, pos[t])] -= r;
                }
            }
            mat[(i, i)] += out;
        }
        let h = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular hitting-time system".into()))?;
        let mut times = vec![0.0; self.size];
        for (i, &s) in free.iter().enumerate() {
            times[s] = h[i];
        }
        Ok(times)
    }
}
