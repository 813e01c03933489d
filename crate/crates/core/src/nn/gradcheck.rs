//! Central finite-difference gradient checking.

use super::param::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

fn scalar(tape: &Tape, v: Var) -> Result<f64> {
    let t = tape.value(v);
    if t.len() != 1 {
        return Err(Error::State(format!(
            "gradient check needs a scalar output, got {:?}",
            t.shape()
        )));
    }
    let x = t.data()[0];
    if !x.is_finite() {
        return Err(Error::Numeric(format!("function value {x}")));
    }
    Ok(x)
}

fn check_finite(what: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numeric(format!("{what} = {x}")))
    }
}

/// Compares the tape gradient of `f` with respect to every coordinate of
/// `inputs` against central differences, returning the maximum relative
/// error.
pub fn grad_check<F>(f: F, inputs: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.input(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        scalar(&tape, out)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    scalar(&tape, out)?;
    let grads = tape.backward(out)?;

    let mut worst = 0.0f64;
    let mut perturbed = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v).map(|g| g.to_vec());
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            perturbed[i].data_mut()[j] = orig + step;
            let plus = eval(&perturbed)?;
            perturbed[i].data_mut()[j] = orig - step;
            let minus = eval(&perturbed)?;
            perturbed[i].data_mut()[j] = orig;
            let numeric = check_finite("numeric gradient", (plus - minus) / (2.0 * step))?;
            let a = check_finite(
                "analytic gradient",
                analytic.as_ref().map_or(0.0, |g| g[j]),
            )?;
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}

fn coord(store: &mut ParamStore, param: usize, j: usize) -> &mut f64 {
    &mut store.iter_mut().nth(param).expect("parameter index").value.data_mut()[j]
}

/// Like [`grad_check`], but over every scalar of every parameter in `store`.
/// `store` is restored before returning.
pub fn grad_check_params<F>(store: &mut ParamStore, f: F, step: f64) -> Result<f64>
where
    F: for<'a> Fn(&mut Tape<'a>) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::with_params(store);
        let out = f(&mut tape)?;
        scalar(&tape, out)
    };

    store.zero_grad();
    {
        let mut tape = Tape::with_params(store);
        let out = f(&mut tape)?;
        scalar(&tape, out)?;
        let grads = tape.backward(out)?;
        drop(tape);
        store.accumulate(&grads);
    }
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    store.zero_grad();

    let mut worst = 0.0f64;
    for (pi, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = *coord(store, pi, j);
            *coord(store, pi, j) = orig + step;
            let plus = eval(store);
            *coord(store, pi, j) = orig - step;
            let minus = eval(store);
            *coord(store, pi, j) = orig;
            let numeric = check_finite("numeric gradient", (plus? - minus?) / (2.0 * step))?;
            worst = worst.max(relative_error(check_finite("analytic gradient", a)?, numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let err = grad_check(
            |tape, v| {
                let y = tape.affine(v[0], v[1], v[2])?;
                let y = tape.scale(y, 3.0);
                Ok(tape.mean(y))
            },
            &[
                Tensor::vector(vec![0.5, -1.5]),
                Tensor::matrix(2, 3, vec![1.0, 2.0, 0.0, -1.0, 0.5, 3.0]).unwrap(),
                Tensor::vector(vec![0.1, 0.2, 0.3]),
            ],
            1e-4,
        )
        .unwrap();
        // x·W is bilinear, so differences in x are exact only up to rounding
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn non_finite_is_numeric_error() {
        let res = grad_check(
            |tape, v| {
                let y = tape.scale(v[0], f64::INFINITY);
                Ok(tape.mean(y))
            },
            &[Tensor::vector(vec![1.0])],
            1e-4,
        );
        assert!(matches!(res, Err(Error::Numeric(_))));
    }

    #[test]
    fn rejects_non_positive_step() {
        let res = grad_check(|tape, v| Ok(tape.mean(v[0])), &[Tensor::vector(vec![1.0])], 0.0);
        assert!(res.is_err());
    }
}
