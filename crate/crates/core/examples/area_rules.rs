//! Which (R, B1, B2) area combinations give back the echo, and with what sign.

use photon_echo::protocol::{classify_areas, classify_areas_nearest};

fn main() {
    println!("{:>4} {:>4} {:>4}  outcome", "R", "B1", "B2");
    for (r, b1, b2) in [
        (1.0, 1.0, 1.0),
        (1.0, 1.0, 2.0),
        (1.0, 1.0, 3.0),
        (1.0, 1.0, 5.0),
        (1.0, 1.0, 7.0),
        (1.0, 3.0, 1.0),
        (1.0, 0.5, 3.0),
        (2.0, 1.0, 3.0),
    ] {
        match classify_areas(r, b1, b2) {
            Some(c) => println!("{r:>3}π {b1:>3}π {b2:>3}π  {c}"),
            None => println!("{r:>3}π {b1:>3}π {b2:>3}π  not covered"),
        }
    }

    let (class, dist) = classify_areas_nearest(1.0, 1.0, 2.9);
    println!("B2 = 2.9π rounds to {class} ({dist:.1}π off)");
}
