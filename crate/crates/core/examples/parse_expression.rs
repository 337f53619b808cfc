//! Parsing, printing and evaluating metric expressions.
//!
//! cargo run --example parse_expression

use finsler::expr::Expression;

fn main() {
    let src = "sqrt(y1^2 + y2^2)/x2";
    let e = Expression::parse(src, 2).expect("valid expression");
    println!("parsed   {src}");
    println!("printed  {e}");
    println!("depth    {}", e.depth());
    println!("vars     {:?}", e.variables());
    println!("F(x=(0,2), y=(0,1)) = {}", e.evaluate(&[0.0, 2.0, 0.0, 1.0]).unwrap());

    let again = Expression::parse(&e.to_string(), 2).unwrap();
    assert_eq!(again.to_string(), e.to_string());

    for bad in ["sqrt(z1)", "y3 + 1", "y1^x1", "(y1 + y2"] {
        match Expression::parse(bad, 2) {
            Ok(_) => println!("{bad:<12} accepted"),
            Err(err) => println!("{bad:<12} {err}"),
        }
    }
    let log = Expression::parse("log(y1)", 2).unwrap();
    println!("log(y1) at y1 = -1: {}", log.evaluate(&[0.0, 0.0, -1.0, 0.0]).unwrap_err());
}
