mod common;

use ndarray::Array2;
use num_complex::Complex64;
use paraxial_tomo::io::{
    decode_rf64, decode_wvsg, encode_rf64, encode_wvsg, parse_config, read_pgm, read_rf64,
    read_wvsg, write_pgm, write_rf64, write_wvsg, PgmImage, Rf64Field,
};
use paraxial_tomo::{ComplexField, Error, Grid2D, RealField, Sinogram, WaveParams};
use proptest::prelude::*;

fn random_sino(seed: u64, n_a: usize, n_y: usize) -> Sinogram {
    let mut r = common::rng(seed);
    let angles = (0..n_a).map(|k| 0.1 * k as f64).collect();
    let params = WaveParams::new(1.5, 37.0).unwrap();
    Sinogram::new(angles, common::random_complex(&mut r, (n_a, n_y)), params).unwrap()
}

#[test]
fn complex_rf64_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = common::rng(3);
    let grid = Grid2D::new(33, 17, 2.5).unwrap();
    let f = ComplexField::new(grid, common::random_complex(&mut r, (33, 17))).unwrap();
    let path = dir.path().join("c.rf64");
    write_rf64(&path, &Rf64Field::Complex(f.clone())).unwrap();
    let Rf64Field::Complex(back) = read_rf64(&path).unwrap() else {
        panic!("expected complex payload");
    };
    assert_eq!(back.grid(), f.grid());
    for (a, b) in back.values().iter().zip(f.values()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
}

#[test]
fn rf64_byte_layout() {
    let grid = Grid2D::new(2, 3, 1.0).unwrap();
    let vals = Array2::from_shape_vec((2, 3), vec![0.5, -1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let bytes = encode_rf64(&Rf64Field::Real(RealField::new(grid, vals).unwrap())).unwrap();
    assert_eq!(&bytes[0..4], b"RF64");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 0);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
    assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 1.0);
    assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 0.5);
    // row-major: second value is (0, 1)
    assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), -1.0);
    assert_eq!(bytes.len(), 24 + 6 * 8);
}

#[test]
fn rf64_rejects_damage() {
    let grid = Grid2D::new(4, 4, 1.0).unwrap();
    let bytes = encode_rf64(&Rf64Field::Real(RealField::zeros(grid))).unwrap();
    assert!(matches!(
        decode_rf64(&bytes[..bytes.len() - 1]),
        Err(Error::TruncatedPayload { .. })
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_rf64(&bad), Err(Error::CorruptHeader(_))));
    let mut flags = bytes.clone();
    flags[4] = 6;
    assert!(matches!(decode_rf64(&flags), Err(Error::CorruptHeader(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_rf64(&extra).is_err());
    assert!(decode_rf64(b"RF").is_err());
    assert!(decode_rf64(b"garbage bytes that are not a field").is_err());
    let mut nan = bytes;
    nan[24..32].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(decode_rf64(&nan).is_err());
}

#[test]
fn wvsg_round_trip_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let s = random_sino(11, 5, 9);
    let path = dir.path().join("s.wvsg");
    write_wvsg(&path, &s).unwrap();
    let back = read_wvsg(&path).unwrap();
    assert_eq!(encode_wvsg(&back).unwrap(), encode_wvsg(&s).unwrap());
    assert_eq!(back.angles(), s.angles());
    assert_eq!(back.params(), s.params());

    let mut empty = encode_wvsg(&s).unwrap();
    empty[8..12].copy_from_slice(&0u32.to_le_bytes());
    assert!(matches!(decode_wvsg(&empty), Err(Error::CorruptHeader(_))));
    let mut version = encode_wvsg(&s).unwrap();
    version[4] = 9;
    assert!(matches!(decode_wvsg(&version), Err(Error::CorruptHeader(_))));
    let full = encode_wvsg(&s).unwrap();
    assert!(matches!(
        decode_wvsg(&full[..full.len() - 8]),
        Err(Error::TruncatedPayload { .. })
    ));
}

#[test]
fn non_finite_payloads_rejected_before_serialisation() {
    let grid = Grid2D::new(3, 3, 1.0).unwrap();
    let mut v = Array2::zeros((3, 3));
    v[[1, 1]] = f64::INFINITY;
    assert!(matches!(RealField::new(grid, v), Err(Error::NonFinite(_))));
    let mut c = Array2::zeros((3, 3));
    c[[0, 2]] = Complex64::new(0.0, f64::NAN);
    assert!(matches!(ComplexField::new(grid, c), Err(Error::NonFinite(_))));
}

#[test]
fn pgm_round_trips_at_both_depths() {
    let dir = tempfile::tempdir().unwrap();
    for maxval in [255u16, 65535] {
        let mut r = common::rng(maxval as u64);
        let data = (0..7 * 5)
            .map(|_| rand::Rng::gen_range(&mut r, 0..=maxval))
            .collect();
        let img = PgmImage {
            width: 7,
            height: 5,
            maxval,
            data,
        };
        let path = dir.path().join(format!("i{maxval}.pgm"));
        write_pgm(&path, &img).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5"));
        let per = if maxval > 255 { 2 } else { 1 };
        assert!(bytes.len() >= 35 * per);
    }
}

#[test]
fn config_defaults_and_errors() {
    let cfg = parse_config("filter.kind = ramlak\n").unwrap();
    let spec = cfg.filter_spec().unwrap();
    assert_eq!(spec.cutoff_fraction(), 1.0);
    assert_eq!(spec.kind().to_string(), "ramlak");
    assert!(matches!(
        parse_config("grid.n = 8\nnot.a.key = 1\n"),
        Err(Error::UnknownKey { line: 2, .. })
    ));
    assert!(matches!(
        parse_config("grid.n = eight\n"),
        Err(Error::ValueOutOfRange { .. })
    ));
    assert!(matches!(
        parse_config("just text\n"),
        Err(Error::MalformedLine { line: 1, .. })
    ));
    // decimal point only, whatever the locale
    assert!(parse_config("wave.l_over_lambda = 1,5\n").is_err());
    assert_eq!(
        parse_config("wave.l_over_lambda = 2.5\n")
            .unwrap()
            .get_f64("wave.l_over_lambda"),
        Some(2.5)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn real_rf64_round_trip(seed in any::<u64>(), n_x in 2usize..20, n_y in 2usize..20) {
        let mut r = common::rng(seed);
        let grid = Grid2D::new(n_x, n_y, 1.0).unwrap();
        let f = RealField::new(grid, common::random_real(&mut r, (n_x, n_y)).mapv(|v| v * 1e200)).unwrap();
        let bytes = encode_rf64(&Rf64Field::Real(f.clone())).unwrap();
        prop_assert_eq!(decode_rf64(&bytes).unwrap(), Rf64Field::Real(f));
    }

    #[test]
    fn decoders_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode_rf64(&bytes);
        let _ = decode_wvsg(&bytes);
        let _ = paraxial_tomo::io::read_pgm_bytes(&bytes);
        let _ = parse_config(&String::from_utf8_lossy(&bytes));
    }

    #[test]
    fn decoders_never_panic_on_valid_prefix(tail in prop::collection::vec(any::<u8>(), 0..100)) {
        let mut bytes = b"RF64".to_vec();
        bytes.extend_from_slice(&tail);
        let _ = decode_rf64(&bytes);
        let mut w = b"WVSG\x01\0\0\0".to_vec();
        w.extend_from_slice(&tail);
        let _ = decode_wvsg(&w);
        let mut p = b"P5\n".to_vec();
        p.extend_from_slice(&tail);
        let _ = paraxial_tomo::io::read_pgm_bytes(&p);
    }
}
