use qforms::basis::{BasisBuilder, Weight};
use qforms::eta::Level;
use std::time::Instant;

fn main() {
    let level = Level::new(13).unwrap();
    let t0 = Instant::now();
    let mut builder = BasisBuilder::new();
    // thm1 rows at p=13: only pole orders divisible by 13 matter
    let poles: Vec<u32> = (1..=52).map(|k| 13 * k).collect();
    let family = builder.build_family(level, Weight::Zero, &poles, 100).unwrap();
    println!("level 13: {} elements to q^100 in {:.1?}", family.len(), t0.elapsed());
    let a = family[51].integer_coefficient(1).unwrap();
    println!("a(676, 1) digits: {}", a.to_string().len());

    let t1 = Instant::now();
    let mut b7 = BasisBuilder::new();
    let poles7: Vec<u32> = (1..=196).collect();
    b7.build_family(Level::new(7).unwrap(), Weight::Zero, &poles7, 100).unwrap();
    println!("level 7: 196 elements to q^100 in {:.1?}", t1.elapsed());
}
