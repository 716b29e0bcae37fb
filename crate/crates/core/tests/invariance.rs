use proptest::prelude::*;
use salbench_core::metrics::{
    auc_judd, cc, emd, kld_sym, nss, resampled_auc, shuffled_auc, sim, EvalContext, ImageFixations,
};
use salbench_core::{FixationSet, Point, SaliencyMap};
use salbench_testkit as oracle;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Instance {
    esm: SaliencyMap,
    gsm: SaliencyMap,
    fix: FixationSet,
    others: Vec<Vec<(u32, u32)>>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (4usize..=12, 4usize..=12).prop_flat_map(|(w, h)| {
        let n = w * h;
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec((0..w as u32, 0..h as u32), 1..=4),
            prop::collection::vec(prop::collection::vec((0..w as u32, 0..h as u32), 1..=6), 2..=4),
        )
            .prop_map(move |(e, g, pts, others)| Instance {
                esm: SaliencyMap::new(w, h, e).unwrap(),
                gsm: SaliencyMap::new(w, h, g).unwrap(),
                fix: FixationSet::new("self", pts.into_iter().map(|(x, y)| Point::new(x, y)).collect()),
                others,
            })
    })
}

fn context(inst: &Instance) -> EvalContext {
    let (w, h) = inst.esm.dims();
    let mut images = vec![ImageFixations {
        fixations: inst.fix.clone(),
        width: w,
        height: h,
    }];
    for (k, pts) in inst.others.iter().enumerate() {
        images.push(ImageFixations {
            fixations: FixationSet::new(format!("other{k}"), pts.iter().map(|&(x, y)| Point::new(x, y)).collect()),
            width: w,
            height: h,
        });
    }
    EvalContext::new(5).with_dataset(images).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn ordering_metrics_ignore_monotone_transforms(inst in instance(), which in 0usize..3) {
        let f = |v: f64| match which {
            0 => v * v * v + v,
            1 => (3.0 * v).exp(),
            _ => (v + 1.0).ln() * 7.0 + 2.0,
        };
        let t = inst.esm.map_values(f).unwrap();
        let ctx = context(&inst);
        if let (Ok(a), Ok(b)) = (auc_judd(&inst.esm, &inst.fix), auc_judd(&t, &inst.fix)) {
            prop_assert!(close(a, b));
        }
        if let (Ok(a), Ok(b)) = (shuffled_auc(&inst.esm, &inst.fix, &ctx), shuffled_auc(&t, &inst.fix, &ctx)) {
            prop_assert!(close(a, b));
        }
        if let (Ok(a), Ok(b)) = (
            resampled_auc(&inst.esm, &inst.gsm, &inst.fix, &ctx),
            resampled_auc(&t, &inst.gsm, &inst.fix, &ctx),
        ) {
            prop_assert!(close(a, b));
        }
    }

    #[test]
    fn nss_and_cc_ignore_positive_affine_maps(inst in instance(), a in 0.05f64..20.0, b in -5.0f64..5.0) {
        let t = inst.esm.map_values(|v| a * v + b).unwrap();
        prop_assert!(close(nss(&inst.esm, &inst.fix).unwrap(), nss(&t, &inst.fix).unwrap()));
        prop_assert!(close(cc(&inst.esm, &inst.gsm).unwrap(), cc(&t, &inst.gsm).unwrap()));
    }

    #[test]
    fn distribution_metrics_ignore_scale(inst in instance(), s in 0.01f64..100.0) {
        let t = inst.esm.map_values(|v| s * v).unwrap();
        prop_assert!(close(sim(&inst.esm, &inst.gsm).unwrap(), sim(&t, &inst.gsm).unwrap()));
        prop_assert!(close(kld_sym(&inst.esm, &inst.gsm).unwrap(), kld_sym(&t, &inst.gsm).unwrap()));
        prop_assert!(close(emd(&inst.esm, &inst.gsm, 4).unwrap(), emd(&t, &inst.gsm, 4).unwrap()));
    }
}

fn grid3() -> impl Strategy<Value = SaliencyMap> {
    prop::collection::vec(0.0f64..1.0, 9)
        .prop_filter("some mass", |v| v.iter().sum::<f64>() > 1e-3)
        .prop_map(|v| SaliencyMap::new(3, 3, v).unwrap())
}

proptest! {
    #[test]
    fn emd_is_a_metric_on_small_grids(a in grid3(), b in grid3(), c in grid3()) {
        let ab = emd(&a, &b, 3).unwrap();
        let ba = emd(&b, &a, 3).unwrap();
        let bc = emd(&b, &c, 3).unwrap();
        let ac = emd(&a, &c, 3).unwrap();
        prop_assert!(close(ab, ba));
        prop_assert!(ac <= ab + bc + TOL);
        prop_assert!(close(ab, oracle::emd_grid(a.values(), b.values(), 3)));
    }
}
