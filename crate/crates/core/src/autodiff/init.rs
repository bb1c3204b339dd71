use rand::Rng;

use super::tensor::Tensor;

/// Glorot/Xavier uniform initialisation, `U(-a, a)` with
/// `a = sqrt(6 / (fan_in + fan_out))`.
///
/// For a conv kernel `[c_out, c_in, kh, kw]` the fans include the receptive
/// field: `fan_in = c_in·kh·kw`, `fan_out = c_out·kh·kw`. For a dense
/// weight `[d_in, d_out]` they are the two dimensions.
pub fn glorot_uniform<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let (fan_in, fan_out) = fans(shape);
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(shape, -limit, limit, rng)
}

pub fn uniform<R: Rng + ?Sized>(shape: &[usize], low: f64, high: f64, rng: &mut R) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(low..high)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and length agree")
}

fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, *n),
        [d_in, d_out] => (*d_in, *d_out),
        [c_out, c_in, rest @ ..] => {
            let field: usize = rest.iter().product();
            (c_in * field, c_out * field)
        }
        [] => (1, 1),
    }
}
