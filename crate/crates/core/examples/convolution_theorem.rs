//! On a cycle, filtering in the graph Fourier domain is circular convolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_ser::spectral::{closed_form_basis, GraphSpec};
use spectral_ser::tensor::Tensor;

fn main() -> spectral_ser::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = 12;
    let basis = closed_form_basis(&GraphSpec::cycle(m)?);

    // even-symmetric kernel: h[i] = h[M - i]
    let mut h = vec![0.0; m];
    for i in 0..=m / 2 {
        let v: f64 = rng.random_range(-1.0..1.0);
        h[i] = v;
        h[(m - i) % m] = v;
    }
    let x = Tensor::from_fn(m, 1, |_, _| rng.random_range(-1.0..1.0));

    let response = basis.circulant_response(&h)?;
    let spectral = basis.filter(&response, &x)?;
    let direct = Tensor::from_fn(m, 1, |n, _| (0..m).map(|j| h[(n + m - j) % m] * x.get(j, 0)).sum());

    println!("{:>3} {:>12} {:>12}", "n", "U g(Λ) Uᵀ x", "h ⊛ x");
    for n in 0..m {
        println!("{n:>3} {:>12.6} {:>12.6}", spectral.get(n, 0), direct.get(n, 0));
    }
    println!("max |difference| = {:.2e}", spectral.max_abs_diff(&direct));
    Ok(())
}
