//! Parsing of the unit-suffixed quantities shared by the topology and
//! control file formats.

/// Parses `<N><bps|kbps|mbps|gbps>` into bits per second.
pub fn parse_bandwidth(token: &str) -> Result<f64, String> {
    let lower = token.to_ascii_lowercase();
    let (number, scale) = if let Some(n) = lower.strip_suffix("gbps") {
        (n, 1e9)
    } else if let Some(n) = lower.strip_suffix("mbps") {
        (n, 1e6)
    } else if let Some(n) = lower.strip_suffix("kbps") {
        (n, 1e3)
    } else if let Some(n) = lower.strip_suffix("bps") {
        (n, 1.0)
    } else {
        return Err(format!(
            "bandwidth `{token}` needs a bps/kbps/mbps/gbps unit"
        ));
    };
    let value = parse_number(number, token)? * scale;
    if !(value > 0.0) || !value.is_finite() {
        return Err(format!("bandwidth `{token}` must be positive"));
    }
    Ok(value)
}

/// Parses `<N><us|ms|s>` into seconds.
pub fn parse_delay(token: &str) -> Result<f64, String> {
    let lower = token.to_ascii_lowercase();
    // division by an exact power of ten keeps "1.2ms" == 0.0012
    let (number, divisor) = if let Some(n) = lower.strip_suffix("us") {
        (n, 1e6)
    } else if let Some(n) = lower.strip_suffix("ms") {
        (n, 1e3)
    } else if let Some(n) = lower.strip_suffix('s') {
        (n, 1.0)
    } else {
        return Err(format!("delay `{token}` needs a us/ms/s unit"));
    };
    let value = parse_number(number, token)? / divisor;
    if value < 0.0 || !value.is_finite() {
        return Err(format!("delay `{token}` must be non-negative"));
    }
    Ok(value)
}

/// Parses a byte count: a plain integer or one with a KiB/MiB/GiB suffix.
pub fn parse_bytes(token: &str) -> Result<u64, String> {
    let (number, scale) = if let Some(n) = token.strip_suffix("GiB") {
        (n, 1u64 << 30)
    } else if let Some(n) = token.strip_suffix("MiB") {
        (n, 1u64 << 20)
    } else if let Some(n) = token.strip_suffix("KiB") {
        (n, 1u64 << 10)
    } else {
        (token, 1)
    };
    let n: u64 = number
        .parse()
        .map_err(|_| format!("`{token}` is not a byte count"))?;
    n.checked_mul(scale)
        .ok_or_else(|| format!("`{token}` overflows"))
}

pub fn parse_number(number: &str, token: &str) -> Result<f64, String> {
    let value: f64 = number
        .parse()
        .map_err(|_| format!("`{token}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("`{token}` is not finite"));
    }
    Ok(value)
}

/// Canonical bandwidth form; `{}` on f64 is the shortest round-tripping repr.
pub fn format_bandwidth(bps: f64) -> String {
    format!("{bps}bps")
}

pub fn format_delay(seconds: f64) -> String {
    format!("{seconds}s")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_units() {
        assert_eq!(parse_bandwidth("10mbps").unwrap(), 1e7);
        assert_eq!(parse_bandwidth("5Mbps").unwrap(), 5e6);
        assert_eq!(parse_bandwidth("64kbps").unwrap(), 64_000.0);
        assert_eq!(parse_bandwidth("1gbps").unwrap(), 1e9);
        assert_eq!(parse_bandwidth("1200bps").unwrap(), 1200.0);
        assert!(parse_bandwidth("0mbps").is_err());
        assert!(parse_bandwidth("-1mbps").is_err());
        assert!(parse_bandwidth("10").is_err());
    }

    #[test]
    fn delay_units() {
        assert_eq!(parse_delay("1.2ms").unwrap(), 0.0012);
        assert_eq!(parse_delay("250us").unwrap(), 0.00025);
        assert_eq!(parse_delay("2s").unwrap(), 2.0);
        assert_eq!(parse_delay("0ms").unwrap(), 0.0);
        assert!(parse_delay("-1ms").is_err());
        assert!(parse_delay("5").is_err());
    }

    #[test]
    fn byte_counts() {
        assert_eq!(parse_bytes("2GiB").unwrap(), 2 * 1024 * 1024 * 1024);
        assert_eq!(parse_bytes("600MiB").unwrap(), 600 * 1024 * 1024);
        assert_eq!(parse_bytes("4096").unwrap(), 4096);
        assert!(parse_bytes("1.5").is_err());
    }

    #[test]
    fn canonical_forms_round_trip() {
        for bw in [1e7, 5e6, 1234.5] {
            assert_eq!(parse_bandwidth(&format_bandwidth(bw)).unwrap(), bw);
        }
        for d in [0.0, 0.0012, 1e-7, 3.25] {
            assert_eq!(parse_delay(&format_delay(d)).unwrap(), d);
        }
    }
}
