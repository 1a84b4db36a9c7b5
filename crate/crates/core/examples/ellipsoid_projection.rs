//! Exact projection onto `{x : xᵀQx ≤ P}` and a quadratic program over the same set.

use asysca::ellipsoid::Ellipsoid;
use nalgebra::{DMatrix, DVector};

fn main() -> asysca::Result<()> {
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0, 9.0]));
    let set = Ellipsoid::new(q, 1.0)?;
    let x = DVector::from_vec(vec![2.0, 1.0, -1.0]);
    let p = set.project(&x)?;
    println!("projection {:?}", p.point.as_slice());
    println!("multiplier {:.6}, xᵀQx = {:.12}", p.multiplier, set.quad(&p.point));
    let again = set.project(&p.point)?;
    println!("idempotence gap {:.1e}", (&again.point - &p.point).norm());

    // min ½xᵀMx − cᵀx over the ellipsoid.
    let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.5]);
    let c = DVector::from_vec(vec![-3.0, 1.0, 2.0]);
    let s = set.minimize_quadratic(&m, &c)?;
    println!("QP solution {:?}, multiplier {:.6}, KKT residual {:.1e}", s.x.as_slice(), s.multiplier, s.kkt_residual);
    Ok(())
}
