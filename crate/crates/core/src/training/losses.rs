use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

/// Perceptual loss: for each tap layer, the squared distance between student
/// and teacher features divided by the per-sample feature size `N_j`, summed
/// over layers and averaged over the batch.
///
/// Features are `batch x N_j`, so each layer term is exactly the element mean
/// of the squared difference.
pub fn perceptual_loss(g: &mut Graph, student: &[Var], teacher: &[Var]) -> Result<Var> {
    if student.len() != teacher.len() || student.is_empty() {
        return Err(Error::Shape(format!(
            "perceptual loss needs equal, non-empty tap lists ({} vs {})",
            student.len(),
            teacher.len()
        )));
    }
    let mut total: Option<Var> = None;
    for (&s, &t) in student.iter().zip(teacher) {
        if g.shape(s) != g.shape(t) {
            return Err(Error::Shape(format!(
                "tap shapes differ: student {:?}, teacher {:?}",
                g.shape(s),
                g.shape(t)
            )));
        }
        let term = g.mse(s, t)?;
        total = Some(match total {
            None => term,
            Some(acc) => g.add(acc, term)?,
        });
    }
    Ok(total.expect("non-empty"))
}

/// Plain-value perceptual loss for a single sample, in `f64`.
pub fn perceptual_loss_value(student: &[&[f32]], teacher: &[&[f32]]) -> Result<f64> {
    if student.len() != teacher.len() {
        return Err(Error::Shape("tap lists differ in length".into()));
    }
    let mut total = 0.0;
    for (s, t) in student.iter().zip(teacher) {
        if s.len() != t.len() || s.is_empty() {
            return Err(Error::Shape(format!("tap sizes {} and {}", s.len(), t.len())));
        }
        let ss: f64 = s.iter().zip(*t).map(|(a, b)| ((*a - *b) as f64).powi(2)).sum();
        total += ss / s.len() as f64;
    }
    Ok(total)
}

/// Handles to the pieces of a combined loss.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: Var,
    pub ce: Var,
    /// Absent when the perceptual weight is zero.
    pub lp: Option<Var>,
}

/// `CE(logits, labels) + lambda * Lp(student, teacher)`, batch-averaged.
/// With `lambda == 0` the perceptual term is not built at all, so the result
/// is exactly the cross-entropy.
pub fn combined_loss(
    g: &mut Graph,
    logits: Var,
    labels: &[usize],
    student: &[Var],
    teacher: &[Var],
    lambda: f32,
) -> Result<LossParts> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let ce = g.softmax_cross_entropy(logits, labels)?;
    if lambda == 0.0 {
        return Ok(LossParts {
            total: ce,
            ce,
            lp: None,
        });
    }
    let lp = perceptual_loss(g, student, teacher)?;
    let weighted = g.scale(lp, lambda);
    let total = g.add(ce, weighted)?;
    Ok(LossParts {
        total,
        ce,
        lp: Some(lp),
    })
}
