//! Grid arguments: either a comma-separated list (`0.1,0.2`) or an
//! inclusive range `start:stop:step`.

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// Range points are snapped to 12 decimals so that `0.05:0.5:0.05` prints
/// as `0.15` rather than `0.15000000000000002`.
fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        };
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if step <= 0.0 || stop < start {
                    return Err(format!("range `{s}` needs step > 0 and stop >= start"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                if n > 1_000_000 {
                    return Err(format!("range `{s}` has too many points"));
                }
                (0..=n).map(|i| snap(start + i as f64 * step)).collect()
            }
            [_] => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
            _ => return Err(format!("`{s}` is neither a list nor start:stop:step")),
        };
        Ok(Grid(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive_and_clean() {
        let g: Grid = "0.05:0.5:0.05".parse().unwrap();
        assert_eq!(g.0.len(), 10);
        assert_eq!(g.0[2], 0.15);
        assert_eq!(g.0[9], 0.5);
        let g: Grid = "0.005:0.335:0.005".parse().unwrap();
        assert_eq!(g.0.len(), 67);
        assert_eq!(*g.0.last().unwrap(), 0.335);
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!("0.1, 0.2".parse::<Grid>().unwrap().0, vec![0.1, 0.2]);
        assert!("0.1:0.2".parse::<Grid>().is_err());
        assert!("0.3:0.1:0.1".parse::<Grid>().is_err());
        assert!("x".parse::<Grid>().is_err());
        assert!("nan".parse::<Grid>().is_err());
    }
}
