//! Shared conventions for tabular output.

/// Version of every CSV column schema written by this crate family.
pub const SCHEMA_VERSION: u32 = 1;

/// First line of every CSV file, identifying the table kind and schema version.
pub fn schema_line(kind: &str) -> String {
    format!("# hetcycle {kind} schema v{SCHEMA_VERSION}")
}

/// Full-precision decimal form (17 significant digits) that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn decimal_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn schema_line_names_kind() {
        assert_eq!(schema_line("sweep"), "# hetcycle sweep schema v1");
    }
}
