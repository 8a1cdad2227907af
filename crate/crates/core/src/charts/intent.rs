use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

use super::catalog::TaxonomyCategory;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Intent {
    pub category: Option<TaxonomyCategory>,
    /// Chart family named explicitly in the prompt.
    pub user_chart_request: Option<String>,
    /// The prompt asks for shares of a whole ("100%", "percent").
    pub wants_percent: bool,
}

fn category_patterns() -> &'static [(Regex, TaxonomyCategory)] {
    static P: OnceLock<Vec<(Regex, TaxonomyCategory)>> = OnceLock::new();
    P.get_or_init(|| {
        [
            (r"\b(comparison|compare[sd]?|comparing)\b", TaxonomyCategory::Comparison),
            (r"\b(distribution|distributed)\b", TaxonomyCategory::Distribution),
            (r"\b(composition|share|shares|percent|percentage|proportion)\b", TaxonomyCategory::Composition),
            (r"\b(relationship|relation|correlation|correlated)\b", TaxonomyCategory::Relationship),
        ]
        .into_iter()
        .map(|(p, c)| (Regex::new(p).expect("intent regex"), c))
        .collect()
    })
}

/// Checked in order; the first match names the family.
fn family_patterns() -> &'static [(Regex, &'static str)] {
    static P: OnceLock<Vec<(Regex, &'static str)>> = OnceLock::new();
    P.get_or_init(|| {
        [
            (r"\bvariable[ -]width\b", "variable_width_column"),
            (r"\bstacked\s+(100\s*%\s*)?area\b", "stacked_area"),
            (r"\bstacked\s+(100\s*%\s*)?(column|bar)", "stacked_column"),
            (r"\b3d\s+area\b", "area_3d"),
            (r"\bhistogram", "histogram"),
            (r"\bwaterfall\b", "waterfall"),
            (r"\btree\s?map\b", "treemap"),
            (r"\bpie\b", "pie"),
            (r"\bbubble\b", "bubble"),
            (r"\b(radar|spider)\b", "radar"),
            (r"\bscatter\s*(chart|plot|graph)?\b", "scatter"),
            (r"\bline\s+(chart|graph|plot)\b", "line"),
            (r"\bcolumn\s+(chart|graph)\b", "column"),
            (r"\bbar\s+(chart|graph)\b", "bar"),
        ]
        .into_iter()
        .map(|(p, f)| (Regex::new(p).expect("family regex"), f))
        .collect()
    })
}

/// Keyword scan; the earliest category keyword in the prompt wins.
pub fn detect_intent(prompt: &str) -> Intent {
    let text = prompt.to_lowercase();
    let category = category_patterns()
        .iter()
        .filter_map(|(re, c)| re.find(&text).map(|m| (m.start(), *c)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, c)| c);
    let user_chart_request = family_patterns()
        .iter()
        .find(|(re, _)| re.is_match(&text))
        .map(|(_, f)| f.to_string());
    let wants_percent = text.contains("100%") || text.contains("percent");
    Intent { category, user_chart_request, wants_percent }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories() {
        assert_eq!(
            detect_intent("Show me a comparison of segment per category").category,
            Some(TaxonomyCategory::Comparison)
        );
        assert_eq!(detect_intent("show me stuff"), Intent::default());
        assert_eq!(
            detect_intent("Show me the composition of percent in sales").category,
            Some(TaxonomyCategory::Composition)
        );
        assert_eq!(
            detect_intent("Show me the distribution of profit").category,
            Some(TaxonomyCategory::Distribution)
        );
    }

    #[test]
    fn explicit_chart_requests() {
        let i = detect_intent("Show me the (waterfall chart) change in profit for ship status");
        assert_eq!(i.user_chart_request.as_deref(), Some("waterfall"));
        let i = detect_intent("Show me a (radar chart) comparison of sales for each category per month");
        assert_eq!(i.user_chart_request.as_deref(), Some("radar"));
        assert_eq!(i.category, Some(TaxonomyCategory::Comparison));
        let i = detect_intent("Show me a (line chart) comparison of sales for each city");
        assert_eq!(i.user_chart_request.as_deref(), Some("line"));
        assert_eq!(detect_intent("a stacked 100% column chart").user_chart_request.as_deref(), Some("stacked_column"));
        assert_eq!(detect_intent("a line histogram").user_chart_request.as_deref(), Some("histogram"));
        assert_eq!(detect_intent("bar chart of prices").user_chart_request.as_deref(), Some("bar"));
        assert_eq!(detect_intent("the sales line per month").user_chart_request, None);
    }
}
