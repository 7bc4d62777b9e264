//! Round-trip properties of the output formats.

use proptest::prelude::*;
use spde::cli::output::fmt_num;
use spde::simulate::binary::{read_array, write_array};

proptest! {
    #[test]
    fn binary_arrays_round_trip(dims in prop::collection::vec(0usize..5, 0..4), seed in any::<u64>()) {
        let len: usize = dims.iter().product();
        let values: Vec<f64> = (0..len as u64).map(|i| f64::from_bits(seed.wrapping_mul(i + 1) >> 2)).collect();
        let mut buf = Vec::new();
        write_array(&mut buf, &dims, &values).unwrap();
        prop_assert_eq!(buf.len(), 12 + 8 * dims.len() + 8 * len);
        let a = read_array(&buf[..]).unwrap();
        prop_assert_eq!(a.dims, dims);
        prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn csv_numbers_parse_back_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = fmt_num(v);
        prop_assert!(!s.contains(','));
        prop_assert_eq!(s.parse::<f64>().unwrap(), v);
    }
}

#[test]
fn truncated_binary_is_rejected() {
    let mut buf = Vec::new();
    write_array(&mut buf, &[2, 3], &[1.0; 6]).unwrap();
    assert!(read_array(&buf[..buf.len() - 1]).is_err());
    buf[0] = b'X';
    assert!(read_array(&buf[..]).is_err());
}
