//! Central-difference verification of reverse-mode gradients.

use super::graph::{Graph, Var};
use super::tensor::Tensor;

/// Compare analytic gradients against central differences for a scalar-loss
/// builder and return the maximum elementwise relative error.
///
/// The builder receives fresh input vars each evaluation and must return a
/// scalar loss. The error metric is `|a - n| / max(|a| + |n|, 1)`, i.e.
/// absolute for small gradients and relative for large ones.
pub fn grad_check<F>(build: F, inputs: &[Tensor], eps: f64) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |tensors: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = tensors.iter().map(|t| g.input(t.clone())).collect();
        let loss = build(&mut g, &vars);
        g.value(loss).item()
    };

    // Analytic gradients.
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let loss = build(&mut g, &vars);
    let grads = g.backward(loss);

    let mut worst: f64 = 0.0;
    let mut perturbed: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]);
        for coord in 0..input.numel() {
            let original = input.data()[coord];
            perturbed[i].data_mut()[coord] = original + eps;
            let plus = eval(&perturbed);
            perturbed[i].data_mut()[coord] = original - eps;
            let minus = eval(&perturbed);
            perturbed[i].data_mut()[coord] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.map(|t| t.data()[coord]).unwrap_or(0.0);
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}
