use crate::error::{LabError, Result};
use crate::hawkes::EventStream;
use crate::stats::CompensatedSum;

/// Parameters of a fixed-background exponential-kernel Hawkes process.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExpHawkesParams {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ExpHawkesParams {
    pub fn branching_ratio(&self) -> f64 {
        self.alpha / self.beta
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(LabError::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_stream(times: &[f64], horizon: f64) -> Result<()> {
    EventStream { times: times.to_vec(), horizon, regimes: None }.validate()
}

/// Σ log λ(t_i⁻) − Λ(T), by the O(n) recursion
/// `A_i = e^{−β(t_i − t_{i−1})}(1 + A_{i−1})`, `λ(t_i⁻) = λ + α·A_i`.
pub fn exp_hawkes_loglik(times: &[f64], horizon: f64, params: ExpHawkesParams) -> Result<f64> {
    params.check()?;
    check_stream(times, horizon)?;
    Ok(loglik_and_grad(times, horizon, params).0)
}

/// Log-likelihood and its gradient with respect to (λ, α, β).
pub(crate) fn loglik_and_grad(times: &[f64], horizon: f64, params: ExpHawkesParams) -> (f64, [f64; 3]) {
    let ExpHawkesParams { lambda, alpha, beta } = params;
    // compensated sums keep the objective smooth enough for the optimizer's
    // final steps, where real changes are far below naive rounding noise
    let mut ll = CompensatedSum::default();
    let (mut g_lambda, mut g_alpha, mut g_beta) =
        (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
    // A = Σ_{j<i} e^{−β(t_i − t_j)},  B = ∂A/∂β = −Σ_{j<i} (t_i − t_j) e^{−β(t_i − t_j)}
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    for &t in times {
        if let Some(p) = prev {
            let dt = t - p;
            let e = (-beta * dt).exp();
            b = e * (b - dt * (1.0 + a));
            a = e * (1.0 + a);
        }
        let intensity = lambda + alpha * a;
        ll.add(intensity.ln());
        g_lambda.add(1.0 / intensity);
        g_alpha.add(a / intensity);
        g_beta.add(alpha * b / intensity);
        prev = Some(t);
    }
    // Λ(T) = λT + (α/β) Σ (1 − e^{−β(T − t_i)})
    let mut tail = CompensatedSum::default();
    let mut tail_dbeta = CompensatedSum::default();
    for &t in times {
        let r = horizon - t;
        tail.add(-(-beta * r).exp_m1());
        tail_dbeta.add(r * (-beta * r).exp());
    }
    let (tail, tail_dbeta) = (tail.value(), tail_dbeta.value());
    ll.add(-lambda * horizon);
    ll.add(-alpha / beta * tail);
    g_lambda.add(-horizon);
    g_alpha.add(-tail / beta);
    g_beta.add(alpha / (beta * beta) * tail - alpha / beta * tail_dbeta);
    (ll.value(), [g_lambda.value(), g_alpha.value(), g_beta.value()])
}
