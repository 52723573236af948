//! Term-overlap relevance ranking for literature hits.

use std::collections::BTreeSet;

use super::search::PaperHit;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "into", "is", "it", "of",
    "on", "or", "over", "that", "the", "this", "to", "under", "via", "we", "with",
];

pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.len() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Distinct non-stopword tokens in first-occurrence order.
pub fn extract_terms(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    tokenize(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

#[derive(Clone, Debug)]
pub struct RankedHit {
    pub hit: PaperHit,
    pub score: f64,
}

/// Scores each hit by the fraction of distinct task terms appearing in its
/// title or abstract, then sorts by score desc, year desc, source_id asc.
pub fn rank_papers(hits: Vec<PaperHit>, task_terms: &[String]) -> Vec<RankedHit> {
    assert!(!task_terms.is_empty(), "task_terms must be non-empty");
    let terms: BTreeSet<&str> = task_terms.iter().map(String::as_str).collect();
    let mut ranked: Vec<RankedHit> = hits
        .into_iter()
        .map(|hit| {
            let doc: BTreeSet<String> = tokenize(&format!("{} {}", hit.title, hit.abstract_text))
                .into_iter()
                .collect();
            let matched = terms.iter().filter(|t| doc.contains(**t)).count();
            RankedHit {
                hit,
                score: matched as f64 / terms.len() as f64,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then(b.hit.year.cmp(&a.hit.year))
            .then(a.hit.source_id.cmp(&b.hit.source_id))
    });
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(title: &str, abstract_text: &str, year: i32, id: &str) -> PaperHit {
        PaperHit {
            title: title.to_string(),
            abstract_text: abstract_text.to_string(),
            year,
            venue: "J. Test".to_string(),
            source_id: id.to_string(),
        }
    }

    #[test]
    fn full_overlap_scores_one_and_ranks_first() {
        let terms = extract_terms("SWIPT beamforming energy");
        let hits = vec![
            hit("Survey", "unrelated topics entirely", 2023, "p2"),
            hit(
                "SWIPT design",
                "beamforming for energy harvesting",
                2021,
                "p1",
            ),
        ];
        let ranked = rank_papers(hits, &terms);
        assert_eq!(ranked[0].hit.source_id, "p1");
        assert_eq!(ranked[0].score, 1.0);
        assert_eq!(ranked[1].score, 0.0);
    }

    #[test]
    fn equal_scores_break_ties_by_year_then_id() {
        let terms = extract_terms("noma");
        let hits = vec![
            hit("NOMA study", "", 2020, "b"),
            hit("NOMA primer", "", 2024, "c"),
            hit("NOMA notes", "", 2024, "a"),
        ];
        let ranked = rank_papers(hits, &terms);
        let order: Vec<&str> = ranked.iter().map(|r| r.hit.source_id.as_str()).collect();
        assert_eq!(order, vec!["a", "c", "b"]);
    }

    #[test]
    fn extract_terms_drops_stopwords_and_duplicates() {
        let terms = extract_terms("Maximize the sum rate of the SWIPT downlink, sum rate!");
        assert_eq!(terms, vec!["maximize", "sum", "rate", "swipt", "downlink"]);
    }
}
