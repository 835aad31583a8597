use std::path::Path;

use adaptact::aat::{decode, encode};
use adaptact::cli::BudgetSpec;
use adaptact::core::Tensor;
use adaptact::report::{read_sensitivity_csv, write_sensitivity_csv};
use proptest::prelude::*;

mod common;

proptest! {
    #[test]
    fn aat_round_trips_bit_exactly(shape in prop::collection::vec(1usize..5, 1..5), seed in any::<u32>()) {
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n).map(|i| f32::from_bits(seed.wrapping_mul(i as u32 + 1) & 0x7f7f_ffff)).collect();
        let t = Tensor::new(shape, data).unwrap();
        let bytes = encode(&t);
        let back = decode(&bytes, Path::new("x.aat")).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        // any truncation is rejected
        let cut = bytes.len() - 1;
        prop_assert!(decode(&bytes[..cut], Path::new("x.aat")).is_err());
    }

    #[test]
    fn byte_budgets_parse(n in 1u64..1 << 40) {
        prop_assert_eq!(n.to_string().parse::<BudgetSpec>().unwrap(), BudgetSpec::Bytes(n));
        prop_assert_eq!(format!("{n}B").parse::<BudgetSpec>().unwrap(), BudgetSpec::Bytes(n));
        prop_assert_eq!(format!("{n}KiB").parse::<BudgetSpec>().unwrap(), BudgetSpec::Bytes(n * 1024));
    }
}

#[test]
fn budget_spec_forms() {
    assert_eq!(
        "75%".parse::<BudgetSpec>().unwrap().resolve(1000).unwrap(),
        750
    );
    assert_eq!(
        "1.5MiB".parse::<BudgetSpec>().unwrap(),
        BudgetSpec::Bytes(1_572_864)
    );
    for bad in ["", "-1", "0%", "x", "5 apples", "nan%"] {
        assert!(bad.parse::<BudgetSpec>().is_err(), "{bad}");
    }
    assert!("0".parse::<BudgetSpec>().unwrap().resolve(10).is_err());
}

#[test]
fn committed_table_round_trips_through_csv() {
    let t = common::table();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    write_sensitivity_csv(&p, &t).unwrap();
    assert_eq!(read_sensitivity_csv(&p).unwrap(), t);
    assert_eq!(
        std::fs::read_to_string(&p).unwrap(),
        std::fs::read_to_string(common::fixture("tiny.sensitivity.csv")).unwrap()
    );
}
