use ranksr_nn::{Float, Module, Sequential, Tensor};

/// `max(0, (s1 - s2) * gamma + eps)`.
pub fn margin_rank_loss(s1: f64, s2: f64, gamma: i8, eps: f64) -> f64 {
    ((s1 - s2) * gamma as f64 + eps).max(0.0)
}

/// `(d/ds1, d/ds2)` of [`margin_rank_loss`]; zero at and beyond the hinge.
pub fn margin_rank_grad(s1: f64, s2: f64, gamma: i8, eps: f64) -> (f64, f64) {
    if (s1 - s2) * gamma as f64 + eps > 0.0 {
        (gamma as f64, -(gamma as f64))
    } else {
        (0.0, 0.0)
    }
}

/// `(s - m)^2`.
pub fn regression_loss(s: f64, m: f64) -> f64 {
    (s - m) * (s - m)
}

fn scores<F: Float>(y: &Tensor<F>) -> Vec<f64> {
    y.data.iter().map(|v| v.f64()).collect()
}

fn stacked<F: Float>(a: &Tensor<F>, b: &Tensor<F>) -> Tensor<F> {
    assert!(a.same_shape(b), "pair batches must match");
    Tensor::stack(&[a, b])
}

/// Mean margin-ranking loss of a batch of pairs. Both branches run as one
/// batch through the shared network.
pub fn rank_batch_loss<F: Float>(
    net: &mut Sequential<F>,
    a: &Tensor<F>,
    b: &Tensor<F>,
    gammas: &[i8],
    eps: f64,
    train: bool,
) -> f64 {
    let s = scores(&net.forward(stacked(a, b), train));
    let n = gammas.len();
    gammas
        .iter()
        .enumerate()
        .map(|(i, &g)| margin_rank_loss(s[i], s[n + i], g, eps))
        .sum::<f64>()
        / n as f64
}

/// [`rank_batch_loss`] plus backpropagation into the parameter gradients.
pub fn rank_batch_step<F: Float>(
    net: &mut Sequential<F>,
    a: &Tensor<F>,
    b: &Tensor<F>,
    gammas: &[i8],
    eps: f64,
    train: bool,
) -> f64 {
    let s = scores(&net.forward(stacked(a, b), train));
    let n = gammas.len();
    let mut ds = vec![F::zero(); 2 * n];
    let mut loss = 0.0;
    for (i, &g) in gammas.iter().enumerate() {
        loss += margin_rank_loss(s[i], s[n + i], g, eps);
        let (d1, d2) = margin_rank_grad(s[i], s[n + i], g, eps);
        ds[i] = F::of(d1 / n as f64);
        ds[n + i] = F::of(d2 / n as f64);
    }
    net.backward(Tensor::from_vec(2 * n, 1, 1, 1, ds));
    loss / n as f64
}

/// Mean squared error between scores and metric targets.
pub fn regression_batch_loss<F: Float>(
    net: &mut Sequential<F>,
    x: &Tensor<F>,
    targets: &[f64],
    train: bool,
) -> f64 {
    let s = scores(&net.forward(x.clone(), train));
    s.iter()
        .zip(targets)
        .map(|(a, m)| regression_loss(*a, *m))
        .sum::<f64>()
        / targets.len() as f64
}

pub fn regression_batch_step<F: Float>(
    net: &mut Sequential<F>,
    x: &Tensor<F>,
    targets: &[f64],
    train: bool,
) -> f64 {
    let s = scores(&net.forward(x.clone(), train));
    let n = targets.len() as f64;
    let ds = s
        .iter()
        .zip(targets)
        .map(|(a, m)| F::of(2.0 * (a - m) / n))
        .collect();
    net.backward(Tensor::from_vec(targets.len(), 1, 1, 1, ds));
    s.iter()
        .zip(targets)
        .map(|(a, m)| regression_loss(*a, *m))
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_cases() {
        assert!((margin_rank_loss(0.2, 0.8, -1, 0.5) - 1.1).abs() < 1e-12);
        assert_eq!(margin_rank_loss(1.0, 0.0, -1, 0.5), 0.0);
        assert_eq!(margin_rank_loss(0.3, 0.3, 1, 0.5), 0.5);
        assert_eq!(margin_rank_loss(0.3, 0.3, -1, 0.5), 0.5);
        assert_eq!(regression_loss(2.0, 2.0), 0.0);
        assert_eq!(regression_loss(1.0, 3.0), 4.0);
        assert_eq!(margin_rank_grad(0.0, 0.5, 1, 0.5), (0.0, 0.0));
        assert_eq!(margin_rank_grad(0.0, 0.2, 1, 0.5), (1.0, -1.0));
    }
}
