mod common;

use common::{random_point, scenario};
use fogfl_core::sca::{convexified_residuals, update_auxiliaries};
use fogfl_core::scenario::rng::Stream;
use fogfl_core::scenario::Scheme;
use fogfl_core::subsolver::SubproblemOptions;

// Surrogates built at one point must lower-bound the original slacks at any
// other point.
#[test]
fn surrogates_minorize_at_foreign_points() {
    let mut rng = Stream::new(77, 3);
    for n in 0..30u64 {
        let scheme = Scheme::ALL[(n % 3) as usize];
        let s = scenario(1 + (n % 3) as usize, 1 + (n % 2) as usize, 1 + ((n / 3) % 2) as usize, 900 + n);
        let opts = SubproblemOptions::new(scheme);
        let anchor = random_point(&s, &opts, &mut rng);
        let x = random_point(&s, &opts, &mut rng);
        let aux = update_auxiliaries(&s, &anchor).unwrap();
        for r in convexified_residuals(&s, &x, &aux, &opts).unwrap() {
            let tol = 1e-9 * (1.0 + r.original.abs());
            assert!(r.gap() >= -tol, "pair {n} {scheme}: {r:?}");
        }
    }
}

#[test]
fn surrogates_are_tight_at_the_anchor() {
    let mut rng = Stream::new(78, 3);
    for n in 0..10u64 {
        let s = scenario(2, 2, 1 + (n % 2) as usize, 950 + n);
        let opts = SubproblemOptions::new(Scheme::RateSplit);
        let x = random_point(&s, &opts, &mut rng);
        let aux = update_auxiliaries(&s, &x).unwrap();
        for r in convexified_residuals(&s, &x, &aux, &opts).unwrap() {
            assert!(r.gap().abs() <= 1e-8, "{r:?}");
        }
    }
}
