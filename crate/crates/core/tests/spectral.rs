use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectral_ser::model::{conv_forward, SpectralConvLayer};
use spectral_ser::spectral::{
    basis_for, closed_form_basis, jacobi_eigendecomposition, laplacian, laplacian_of_kind,
    max_eigenvalue_deviation, max_projector_deviation, GraphSpec, LaplacianKind, Topology,
};
use spectral_ser::tensor::Tensor;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn analytic_eigenvalues(topology: Topology, m: usize) -> Vec<f64> {
    let mf = m as f64;
    sorted(
        (0..m)
            .map(|k| match topology {
                Topology::Cycle => 2.0 - 2.0 * (2.0 * PI * k as f64 / mf).cos(),
                Topology::Line => 2.0 - 2.0 * (PI * k as f64 / mf).cos(),
            })
            .collect(),
    )
}

#[test]
fn closed_form_agrees_with_jacobi_up_to_16_nodes() {
    for m in 3..=16 {
        for topology in [Topology::Cycle, Topology::Line] {
            let spec = GraphSpec::new(m, topology).unwrap();
            let closed = closed_form_basis(&spec);
            let jacobi = jacobi_eigendecomposition(&laplacian(&spec)).unwrap();
            let de = max_eigenvalue_deviation(&closed, &jacobi);
            let dp = max_projector_deviation(&closed, &jacobi);
            assert!(de <= 1e-10, "{topology} M={m}: eigenvalue deviation {de:e}");
            assert!(dp <= 1e-8, "{topology} M={m}: projector deviation {dp:e}");
        }
    }
}

#[test]
fn analytic_spectra_up_to_64_nodes() {
    for m in 3..=64 {
        for topology in [Topology::Cycle, Topology::Line] {
            let spec = GraphSpec::new(m, topology).unwrap();
            let basis = closed_form_basis(&spec);
            let got = sorted(basis.eigenvalues().to_vec());
            let want = analytic_eigenvalues(topology, m);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10, "{topology} M={m}: {g} vs {w}");
            }
            assert!(basis.orthonormality_error() <= 1e-12);
            assert!(basis.reconstruction_error(&laplacian(&spec)) <= 1e-10);
        }
    }
}

#[test]
fn hand_computed_small_spectra() {
    let cycle4 = closed_form_basis(&GraphSpec::cycle(4).unwrap());
    let line3 = closed_form_basis(&GraphSpec::line(3).unwrap());
    for (basis, want) in [(cycle4, vec![0.0, 2.0, 2.0, 4.0]), (line3, vec![0.0, 1.0, 3.0])] {
        let got = sorted(basis.eigenvalues().to_vec());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn normalized_bases_diagonalize_their_laplacian() {
    for m in [3, 4, 7, 12, 33] {
        for topology in [Topology::Cycle, Topology::Line] {
            let spec = GraphSpec::new(m, topology).unwrap();
            let basis = basis_for(&spec, LaplacianKind::Normalized).unwrap();
            let target = laplacian_of_kind(&spec, LaplacianKind::Normalized);
            assert!(basis.reconstruction_error(&target) <= 1e-10, "{topology} M={m}");
            assert!(basis.orthonormality_error() <= 1e-10);
            let eig = sorted(basis.eigenvalues().to_vec());
            assert!(eig[0].abs() < 1e-10 && *eig.last().unwrap() <= 2.0 + 1e-10);
        }
    }
}

/// `y[n] = Σ_j h[(n − j) mod M] x[j]`, column by column.
fn circular_convolution(h: &[f64], x: &Tensor) -> Tensor {
    let m = h.len();
    Tensor::from_fn(x.rows(), x.cols(), |n, c| {
        (0..m).map(|j| h[(n + m - j) % m] * x.get(j, c)).sum()
    })
}

#[test]
fn convolution_theorem_on_cycles() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in [4, 8, 12] {
        let basis = closed_form_basis(&GraphSpec::cycle(m).unwrap());
        for _ in 0..20 {
            let mut h = vec![0.0; m];
            for i in 0..=m / 2 {
                let v = rng.random_range(-1.0..1.0);
                h[i] = v;
                h[(m - i) % m] = v;
            }
            let x = Tensor::from_fn(m, 3, |_, _| rng.random_range(-1.0..1.0));
            let response = basis.circulant_response(&h).unwrap();
            let spectral = basis.filter(&response, &x).unwrap();
            let direct = circular_convolution(&h, &x);
            assert!(spectral.max_abs_diff(&direct) <= 1e-9, "M={m}");
        }
    }
}

#[test]
fn circulant_response_rejects_line_bases() {
    let basis = closed_form_basis(&GraphSpec::line(6).unwrap());
    assert!(basis.circulant_response(&[0.0; 6]).is_err());
}

#[test]
fn parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for topology in [Topology::Cycle, Topology::Line] {
        let basis = closed_form_basis(&GraphSpec::new(20, topology).unwrap());
        let x = Tensor::from_fn(20, 4, |_, _| rng.random_range(-1.0..1.0));
        let x_hat = basis.gft(&x).unwrap();
        let rel = (x_hat.frobenius_norm() - x.frobenius_norm()).abs() / x.frobenius_norm();
        assert!(rel <= 1e-10);
        assert!(basis.igft(&x_hat).unwrap().max_abs_diff(&x) <= 1e-12);
    }
}

#[test]
fn linear_kernel_collapses_to_plain_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for topology in [Topology::Cycle, Topology::Line] {
        for laplacian in [LaplacianKind::Combinatorial, LaplacianKind::Normalized] {
            for m in [5, 16, 120] {
                let basis = basis_for(&GraphSpec::new(m, topology).unwrap(), laplacian).unwrap();
                let w = Tensor::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
                let h = Tensor::from_fn(m, 6, |_, _| rng.random_range(-1.0..1.0));
                let layer = SpectralConvLayer::LinearKernel { w: w.clone() };
                let out = conv_forward(&layer, &basis, &h).unwrap();
                assert!(out.max_abs_diff(&h.matmul(&w).unwrap()) <= 1e-10, "{topology} {laplacian} M={m}");
            }
        }
    }
}

#[test]
fn jacobi_rejects_asymmetric_input() {
    let a = Tensor::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
    assert!(jacobi_eigendecomposition(&a).is_err());
}

#[test]
fn too_small_graphs_are_rejected() {
    assert!(GraphSpec::cycle(2).is_err());
    assert!(GraphSpec::line(1).is_err());
    assert!(GraphSpec::line(2).is_ok());
}
