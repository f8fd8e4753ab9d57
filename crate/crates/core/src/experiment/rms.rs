use super::ExperimentError;

/// Root-mean-square deviation of `series` from `setpoint`.
pub fn rms_error(series: &[f64], setpoint: f64) -> Result<f64, ExperimentError> {
    if series.is_empty() {
        return Err(ExperimentError::EmptySeries);
    }
    let sum_sq: f64 = series.iter().map(|x| (x - setpoint) * (x - setpoint)).sum();
    Ok((sum_sq / series.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_at_setpoint() {
        assert_eq!(rms_error(&[0.3; 17], 0.3).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_pair() {
        assert_eq!(rms_error(&[1.5, -0.5], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn empty() {
        assert!(matches!(
            rms_error(&[], 0.0),
            Err(ExperimentError::EmptySeries)
        ));
    }
}
