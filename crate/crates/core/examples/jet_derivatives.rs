//! Taylor jets of an expression: every partial derivative up to a given
//! order from a single evaluation.
//!
//! cargo run --example jet_derivatives

use finsler::expr::Expression;
use finsler::jets::{lift, MultiIndex};

fn main() {
    // F² for the half-plane metric at x = (0, 2), y = (1, 1)
    let e = Expression::parse("(y1^2 + y2^2)/x2^2", 2).unwrap();
    let jet = lift(&e, &[0.0, 2.0, 1.0, 1.0], 4).unwrap();
    println!("value                 {}", jet.value());

    // slots are ordered x1, x2, y1, y2
    let cases = [
        ("d/dy1", vec![0, 0, 1, 0], 2.0 * 1.0 / 4.0),
        ("d2/dy1dy1", vec![0, 0, 2, 0], 2.0 / 4.0),
        ("d/dx2", vec![0, 1, 0, 0], -2.0 * 2.0 / 8.0),
        ("d3/dx2dy1dy1", vec![0, 1, 2, 0], -4.0 / 8.0),
        ("d4/dx2^4", vec![0, 4, 0, 0], 2.0 * 120.0 / 2f64.powi(6)),
    ];
    for (label, counts, exact) in cases {
        let d = jet.partial(&MultiIndex::from_counts(&counts)).unwrap();
        println!("{label:<20}  jet {d:>12.9}  exact {exact:>12.9}");
    }
    println!("coefficients stored up to order {}: {}", jet.order(), jet.coefficients().len());
}
