//! Closed-form carrier-to-interference values pinned against an independent
//! quadrature pipeline (Simpson synthesis of h‡, same lattice/moment
//! algebra). Tolerances are far below any physical significance; drift here
//! means a convention changed somewhere in the kernel or moment chain.

use carrier_forge::cir::{cir_single, CirInputs};
use carrier_forge::hpa::{taylor_coeffs, SalehParams};
use carrier_forge::kernels::build_kernel_table;
use carrier_forge::moments::{kappa_set, ConstellationMoments, KappaSet};
use carrier_forge::omux::SlopePair;
use carrier_forge::pulse::PulseSpec;

fn kappas(xg: f64, yd: f64, alpha: f64) -> KappaSet {
    let p = PulseSpec::new(1.0, alpha, 32, 16).unwrap();
    let t = build_kernel_table(&p, &SlopePair::from_normalized(xg, yd), 10).unwrap();
    kappa_set(&t, &ConstellationMoments::qpsk()).unwrap()
}

fn cir_db(kappas: &KappaSet, p_db: f64) -> f64 {
    let inputs = CirInputs {
        p: 10f64.powf(p_db / 10.0),
        coeffs: taylor_coeffs(&SalehParams::default(), 0.0).unwrap(),
        kappas: *kappas,
        power_fraction: 1.0,
    };
    cir_single(&inputs).1.cir_total_db
}

#[test]
fn gain_slope_curve_follows_the_reference() {
    let k = kappas(1.0, 0.0, 0.2);
    let expected = [
        (-40.0, 30.979638580765577),
        (-20.0, 30.72875640801788),
        (-10.0, 21.827635796984204),
        (-5.0, 13.65431467507679),
        (0.0, 12.223591489189182),
    ];
    for (p_db, want) in expected {
        let got = cir_db(&k, p_db);
        assert!((got - want).abs() < 1e-7, "P={p_db}: {got} vs {want}");
    }
}

#[test]
fn weak_signal_limit_is_the_slope_isi_floor() {
    let k = kappas(1.0, 0.0, 0.2);
    let floor = 10.0 * (k.ku11 / k.ki11).log10();
    assert!((floor - 30.97956248053994).abs() < 1e-7, "floor {floor}");
    // 20 dB below the lowest curve point the ratio sits on the floor
    assert!((cir_db(&k, -60.0) - floor).abs() < 1e-4);
}

#[test]
fn pure_nonlinear_reference_points() {
    let expected = [
        (0.05, [40.073939556278845, 19.372350505066176, 10.948493973351535]),
        (0.2, [43.081250157148176, 22.390071280551034, 13.746572944782859]),
        (0.35, [46.30358039701114, 25.621882014887905, 16.818586807397118]),
    ];
    for (alpha, vals) in expected {
        let k = kappas(0.0, 0.0, alpha);
        for (p_db, want) in [-20.0, -10.0, -5.0].into_iter().zip(vals) {
            let got = cir_db(&k, p_db);
            assert!(
                (got - want).abs() < 1e-7,
                "alpha={alpha} P={p_db}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn delay_slope_and_mixed_slope_points() {
    let cases = [
        (5.0, 0.0, 15.921928189752139),
        (0.0, 1.0, 12.184200102844986),
        (2.0, 3.0, 1.5620547071422415),
    ];
    for (xg, yd, want) in cases {
        let k = kappas(xg, yd, 0.2);
        let got = cir_db(&k, -10.0);
        assert!((got - want).abs() < 1e-7, "xg={xg} yd={yd}: {got} vs {want}");
    }
}
