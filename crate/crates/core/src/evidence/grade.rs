use crate::domain::{Bias, EvidenceItem, EvidenceKind, Grade};

/// Quality level of a single item.
///
/// Randomised trials are High with low risk of bias and Moderate otherwise;
/// observational studies are Moderate when robust (low bias) and Low
/// otherwise; expert opinion is Very Low. Guidelines are secondary syntheses
/// and rank as Moderate (low bias) or Low.
pub fn item_grade(kind: EvidenceKind, bias: Bias) -> Grade {
    match (kind, bias) {
        (EvidenceKind::Rct, Bias::Low) => Grade::High,
        (EvidenceKind::Rct, _) => Grade::Moderate,
        (EvidenceKind::Observational, Bias::Low) => Grade::Moderate,
        (EvidenceKind::Observational, _) => Grade::Low,
        (EvidenceKind::Guideline, Bias::Low) => Grade::Moderate,
        (EvidenceKind::Guideline, _) => Grade::Low,
        (EvidenceKind::ExpertOpinion, _) => Grade::VeryLow,
    }
}

/// Chain grade is the best item grade. No items means Very Low with score 0.
pub fn assess_grade<'a>(items: impl IntoIterator<Item = &'a EvidenceItem>) -> (Grade, f64) {
    items
        .into_iter()
        .map(|i| item_grade(i.kind, i.bias))
        .max()
        .map_or((Grade::VeryLow, 0.0), |g| (g, g.score()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(kind: EvidenceKind, bias: Bias) -> EvidenceItem {
        EvidenceItem {
            id: format!("{kind:?}-{bias:?}"),
            kind,
            year: 2024,
            bias,
            title: String::new(),
            text: String::new(),
            source: String::new(),
            relevance: 0.9,
        }
    }

    #[test]
    fn low_bias_rct_is_high() {
        assert_eq!(assess_grade([&item(EvidenceKind::Rct, Bias::Low)]), (Grade::High, 1.0));
    }

    #[test]
    fn expert_opinion_only_is_very_low() {
        let g = assess_grade([&item(EvidenceKind::ExpertOpinion, Bias::Low)]);
        assert_eq!(g, (Grade::VeryLow, 0.1));
    }

    #[test]
    fn empty_is_zero_score() {
        assert_eq!(assess_grade(std::iter::empty()), (Grade::VeryLow, 0.0));
    }

    #[test]
    fn order_independent() {
        let a = item(EvidenceKind::Observational, Bias::High);
        let b = item(EvidenceKind::Rct, Bias::Unknown);
        let c = item(EvidenceKind::ExpertOpinion, Bias::Low);
        assert_eq!(assess_grade([&a, &b, &c]), assess_grade([&c, &a, &b]));
        assert_eq!(assess_grade([&a, &b, &c]).0, Grade::Moderate);
    }
}
