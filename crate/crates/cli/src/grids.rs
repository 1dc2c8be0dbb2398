//! Grid-axis parsing for the sweep commands.

/// Parses either a single value (`"0.5"`) or an inclusive range
/// (`"start:step:end"`). Points are computed as `start + k * step` so the
/// axis is independent of accumulation order; the end point is included
/// when it lands within a relative epsilon of a step.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let parse = |s: &str| -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("'{s}' is not a number in grid '{spec}'"))
    };
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [start, step, end] => {
            let (start, step, end) = (parse(start)?, parse(step)?, parse(end)?);
            if !(start.is_finite() && step.is_finite() && end.is_finite()) {
                return Err(format!("grid '{spec}' contains a non-finite bound"));
            }
            if step <= 0.0 {
                return Err(format!("grid '{spec}' needs a positive step"));
            }
            if end < start {
                return Err(format!("grid '{spec}' ends before it starts"));
            }
            let count = ((end - start) / step + 1e-9).floor() as u64 + 1;
            if count > 1_000_000 {
                return Err(format!("grid '{spec}' has {count} points; limit is 1e6"));
            }
            Ok((0..count).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(format!(
            "grid '{spec}' must be a single value or start:step:end"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive_and_multiplicative() {
        let g = parse_grid("0:0.05:0.95").unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[19], 19.0 * 0.05);

        let h = parse_grid("0:0.1:1.0").unwrap();
        assert_eq!(h.len(), 11);
        assert_eq!(h[10], 1.0);
    }

    #[test]
    fn single_values_and_garbage() {
        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        assert!(parse_grid("0:0:1").is_err());
        assert!(parse_grid("1:0.1:0").is_err());
        assert!(parse_grid("a:b:c").is_err());
        assert!(parse_grid("0:0.1").is_err());
        assert!(parse_grid("0:1e-9:1").is_err());
    }
}
