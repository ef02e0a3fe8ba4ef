//! Closed-form graph Fourier bases against the Jacobi eigensolver.
//!
//! `cargo run --example inspect_basis -- [nodes]`

use spectral_ser::spectral::{
    basis_for, closed_form_basis, jacobi_eigendecomposition, laplacian, max_eigenvalue_deviation,
    max_projector_deviation, GraphSpec, LaplacianKind, Topology,
};

fn main() -> spectral_ser::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    for topology in [Topology::Cycle, Topology::Line] {
        let spec = GraphSpec::new(m, topology)?;
        let closed = closed_form_basis(&spec);
        let jacobi = jacobi_eigendecomposition(&laplacian(&spec))?;
        let mut eig = closed.eigenvalues().to_vec();
        eig.sort_by(f64::total_cmp);
        let shown: Vec<String> = eig.iter().map(|v| format!("{v:.4}")).collect();
        println!("{topology} M={m}");
        println!("  eigenvalues          {}", shown.join(" "));
        println!("  eigenvalue deviation {:.2e}", max_eigenvalue_deviation(&closed, &jacobi));
        println!("  projector deviation  {:.2e}", max_projector_deviation(&closed, &jacobi));
        println!("  orthonormality error {:.2e}", closed.orthonormality_error());

        let normalized = basis_for(&spec, LaplacianKind::Normalized)?;
        let top = normalized.eigenvalues().iter().cloned().fold(f64::MIN, f64::max);
        println!("  normalized spectrum max {top:.4}");
    }
    Ok(())
}
