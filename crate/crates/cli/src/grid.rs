//! Grid arguments: `start:stop:step` ranges or comma-separated lists.

use crate::error::CliError;

/// Parses `start:stop:step` (start included, values beyond `stop` dropped)
/// or a comma-separated list of numbers.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Domain(format!("grid '{text}' must be start:stop:step")));
        }
        let nums = parts
            .iter()
            .map(|p| parse_number(p))
            .collect::<Result<Vec<f64>, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) {
            return Err(CliError::Domain(format!("grid '{text}': step must be positive")));
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if !(count >= 0.0) || count > 1e7 {
            return Err(CliError::Domain(format!("grid '{text}' is empty or too large")));
        }
        (0..=count as usize).map(|i| start + i as f64 * step).collect()
    } else {
        text.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(parse_number)
            .collect::<Result<Vec<f64>, _>>()?
    };
    if values.is_empty() {
        return Err(CliError::Domain(format!("grid '{text}' is empty")));
    }
    Ok(values)
}

/// Comma-separated non-negative integers.
pub fn parse_orders(text: &str) -> Result<Vec<usize>, CliError> {
    let out = text
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Domain(format!("'{p}' is not a non-negative integer")))
        })
        .collect::<Result<Vec<usize>, _>>()?;
    if out.is_empty() {
        return Err(CliError::Domain("empty order list".into()));
    }
    Ok(out)
}

fn parse_number(p: &str) -> Result<f64, CliError> {
    let v: f64 = p
        .trim()
        .parse()
        .map_err(|_| CliError::Domain(format!("'{p}' is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::Domain(format!("'{p}' is not finite")));
    }
    Ok(v)
}
