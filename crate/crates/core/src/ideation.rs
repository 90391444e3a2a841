//! Candidate idea generation, selection by the idea-selection score S, and
//! iterative refinement to maturity.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{PipelineError, Result};
use crate::gateway::schema::ids;
use crate::gateway::{cosine_similarity, ChatRequest, EmbeddingVector, Gateway, PromptKind};
use crate::retrieval::{MethodSet, ResearchBrief};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Maturity {
    Draft,
    Refined,
    Mature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub iteration: u32,
    pub suggestions: Vec<String>,
    pub revised_design: String,
    pub maturity_verdict: bool,
    pub verdict_rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Idea {
    pub idea_id: String,
    pub title: String,
    pub design: String,
    pub tasks: Vec<String>,
    pub challenges: Vec<String>,
    pub reasoning: String,
    pub maturity: Maturity,
    pub history: Vec<RefinementStep>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

impl Idea {
    pub fn validate(&self) -> Result<()> {
        if self.reasoning.trim().is_empty() {
            return Err(PipelineError::Validation(format!(
                "idea `{}` has empty reasoning",
                self.idea_id
            )));
        }
        if self.maturity == Maturity::Draft && self.history.is_empty() && self.challenges.is_empty()
        {
            return Err(PipelineError::Validation(format!(
                "draft idea `{}` has no challenges",
                self.idea_id
            )));
        }
        Ok(())
    }
}

/// Text embedded when an idea is compared to methods: title plus design.
pub fn idea_embedding_text(idea: &Idea) -> String {
    format!("{}\n{}", idea.title, idea.design)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub idea_id: String,
    pub n_above_threshold: usize,
    pub n_methods: usize,
    pub score: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub challenge_index: usize,
    pub text: String,
}

fn method_salient(set: &MethodSet) -> Value {
    Value::Array(
        set.entries
            .iter()
            .map(|e| {
                json!({
                    "name": e.method_name,
                    "orientation": e.orientation,
                    "text": if e.embedding_text.is_empty() { e.method_name.clone() } else { e.embedding_text.clone() },
                })
            })
            .collect(),
    )
}

fn candidate_request(
    brief: &ResearchBrief,
    existing: &MethodSet,
    inspirations: &MethodSet,
    index: usize,
    k: usize,
    seed: u64,
) -> ChatRequest {
    let existing_names = existing.method_names().join("; ");
    let inspiration_names = inspirations.method_names().join("; ");
    ChatRequest::new(
        PromptKind::Candidates,
        ids::CANDIDATE_IDEA,
        format!(
            "Generate research idea candidate {index} of {k} with a detailed design, \
             step-by-step task decomposition, technical challenges, and explicit reasoning \
             for why the idea is likely to work.\n{}\nExisting methods: {existing_names}\n\
             Inspirational methods: {inspiration_names}",
            brief.composed_query
        ),
    )
    .with_seed(seed)
    .with_salient("index", index as u64)
    .with_salient("k", k as u64)
    .with_salient("domain", brief.domain.clone())
    .with_salient("problem", brief.problem.clone())
    .with_salient("existing", method_salient(existing))
    .with_salient("inspirations", method_salient(inspirations))
}

fn idea_from_value(index: usize, value: &Value) -> Idea {
    let strings = |key: &str| -> Vec<String> {
        value[key]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    };
    Idea {
        idea_id: format!("idea-{index:02}"),
        title: value["title"].as_str().unwrap_or_default().to_string(),
        design: value["design"].as_str().unwrap_or_default().to_string(),
        tasks: strings("tasks"),
        challenges: strings("challenges"),
        reasoning: value["reasoning"].as_str().unwrap_or_default().to_string(),
        maturity: Maturity::Draft,
        history: Vec::new(),
        degraded: false,
    }
}

/// Generate exactly `k` candidate ideas from B ⊕ E_m ⊕ I_m, fanning out one
/// gateway call per candidate.
pub fn generate_candidates(
    gateway: &Gateway,
    brief: &ResearchBrief,
    existing: &MethodSet,
    inspirations: &MethodSet,
    k: usize,
    seed: u64,
) -> Result<Vec<Idea>> {
    if existing.entries.is_empty() {
        return Err(PipelineError::Precondition(
            "candidate generation requires a non-empty existing method set".into(),
        ));
    }
    if k == 0 {
        return Err(PipelineError::Precondition("k must be at least 1".into()));
    }

    let requests: Vec<ChatRequest> = (0..k)
        .map(|i| candidate_request(brief, existing, inspirations, i, k, seed))
        .collect();
    let mut ideas = Vec::with_capacity(k);
    let mut failures = Vec::new();
    for (index, response) in gateway.complete_batch(&requests).into_iter().enumerate() {
        match response {
            Ok(record) => {
                let idea = idea_from_value(index, &record.value);
                idea.validate()?;
                ideas.push(idea);
            }
            Err(e) => failures.push(format!("candidate {index}: {e}")),
        }
    }
    if ideas.len() < k {
        return Err(PipelineError::Generation(format!(
            "only {} of {k} candidates were valid after retries: {}",
            ideas.len(),
            failures.join("; ")
        )));
    }
    Ok(ideas)
}

/// Idea-selection score S = N_>t / N_Em, counting existing methods whose
/// cosine similarity to the idea strictly exceeds t.
pub fn selection_score(
    idea_id: &str,
    existing_vectors: &[EmbeddingVector],
    idea_vector: &EmbeddingVector,
    t: f64,
) -> Result<SelectionScore> {
    if existing_vectors.is_empty() {
        return Err(PipelineError::Precondition(
            "selection score requires a non-empty existing method set".into(),
        ));
    }
    let mut above = 0usize;
    for vector in existing_vectors {
        if cosine_similarity(idea_vector, vector)? > t {
            above += 1;
        }
    }
    Ok(SelectionScore {
        idea_id: idea_id.to_string(),
        n_above_threshold: above,
        n_methods: existing_vectors.len(),
        score: above as f64 / existing_vectors.len() as f64,
        threshold: t,
    })
}

/// Embed all candidates and method texts in one batch, score them, and pick
/// the candidate with minimal S (ties go to the earliest candidate).
pub fn select_initial(
    gateway: &Gateway,
    candidates: &[Idea],
    method_texts: &[String],
    t: f64,
) -> Result<(Idea, Vec<SelectionScore>)> {
    if candidates.is_empty() {
        return Err(PipelineError::Precondition("no candidates to select from".into()));
    }
    if method_texts.is_empty() {
        return Err(PipelineError::Precondition(
            "selection requires at least one existing method text".into(),
        ));
    }

    let mut texts: Vec<String> = candidates.iter().map(idea_embedding_text).collect();
    texts.extend(method_texts.iter().cloned());
    let vectors = gateway.embed_batch(&texts)?;
    let (idea_vectors, method_vectors) = vectors.split_at(candidates.len());

    let mut scores = Vec::with_capacity(candidates.len());
    for (idea, vector) in candidates.iter().zip(idea_vectors) {
        scores.push(selection_score(&idea.idea_id, method_vectors, vector, t)?);
    }
    let best = scores
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.score
                .partial_cmp(&b.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .expect("candidates non-empty");
    Ok((candidates[best].clone(), scores))
}

/// Ask for suggestions addressing the idea's open challenges; each
/// suggestion references the challenge it targets.
pub fn suggest_improvements(gateway: &Gateway, idea: &Idea) -> Result<Vec<Suggestion>> {
    if idea.challenges.is_empty() {
        return Err(PipelineError::Precondition(format!(
            "idea `{}` has no open challenges to address",
            idea.idea_id
        )));
    }
    let request = ChatRequest::new(
        PromptKind::Suggest,
        ids::SUGGESTIONS,
        format!(
            "Provide suggestions for addressing the technical challenges of this idea.\n\
             Idea: {}\nChallenges: {:?}",
            idea.title, idea.challenges
        ),
    )
    .with_salient("idea_title", idea.title.clone())
    .with_salient("challenges", json!(idea.challenges));
    let response = gateway.complete(&request)?;
    let suggestions: Vec<Suggestion> = response.value["suggestions"]
        .as_array()
        .map(|arr| {
            arr.iter()
                .map(|s| Suggestion {
                    challenge_index: s["challenge_index"].as_u64().unwrap_or(0) as usize,
                    text: s["text"].as_str().unwrap_or_default().to_string(),
                })
                .collect()
        })
        .unwrap_or_default();
    for suggestion in &suggestions {
        if suggestion.challenge_index >= idea.challenges.len() {
            return Err(PipelineError::Validation(format!(
                "suggestion references challenge {} but only {} exist",
                suggestion.challenge_index,
                idea.challenges.len()
            )));
        }
    }
    Ok(suggestions)
}

/// Produce a refined idea incorporating the suggestions. The idea id is
/// preserved and a refinement step is appended; on error the caller keeps
/// the prior version untouched.
pub fn refine(gateway: &Gateway, idea: &Idea, suggestions: &[Suggestion]) -> Result<Idea> {
    if suggestions.is_empty() {
        return Err(PipelineError::Precondition("refine requires suggestions".into()));
    }
    let iteration = idea.history.len() as u32 + 1;
    let suggestions_json: Vec<Value> = suggestions
        .iter()
        .map(|s| json!({"challenge_index": s.challenge_index as u64, "text": s.text}))
        .collect();
    let request = ChatRequest::new(
        PromptKind::Refine,
        ids::REFINED_IDEA,
        format!(
            "Refine this idea by incorporating the suggestions; return the revised design, \
             the remaining challenges, and the updated task list.\nIdea: {}\nDesign: {}\n\
             Suggestions: {}",
            idea.title,
            idea.design,
            serde_json::to_string(&suggestions_json).unwrap_or_default()
        ),
    )
    .with_salient("idea_title", idea.title.clone())
    .with_salient("design", idea.design.clone())
    .with_salient("challenges", json!(idea.challenges))
    .with_salient("tasks", json!(idea.tasks))
    .with_salient("suggestions", Value::Array(suggestions_json))
    .with_salient("iteration", iteration as u64);
    let response = gateway.complete(&request).map_err(|e| match e {
        PipelineError::StructuredOutput { schema_id, attempts, detail, last_response } => {
            PipelineError::Refinement(format!(
                "schema `{schema_id}` still invalid after {attempts} attempt(s): {detail} \
                 (last response: {last_response})"
            ))
        }
        other => other,
    })?;

    let strings = |key: &str| -> Vec<String> {
        response.value[key]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    };
    let revised_design = response.value["design"].as_str().unwrap_or_default().to_string();
    let mut refined = idea.clone();
    refined.design = revised_design.clone();
    refined.challenges = strings("challenges");
    refined.tasks = strings("tasks");
    refined.history.push(RefinementStep {
        iteration,
        suggestions: suggestions.iter().map(|s| s.text.clone()).collect(),
        revised_design,
        maturity_verdict: false,
        verdict_rationale: String::new(),
    });
    Ok(refined)
}

/// Structured maturity verdict. A response that stays malformed after
/// retries is treated as "not mature" with a logged warning so the
/// optimization loop keeps going.
pub fn judge_maturity(gateway: &Gateway, idea: &Idea) -> Result<(bool, String)> {
    let request = ChatRequest::new(
        PromptKind::Maturity,
        ids::MATURITY,
        format!(
            "Judge whether this idea is mature: are all listed challenges addressed with \
             concrete mitigations?\nIdea: {}\nChallenges: {:?}",
            idea.title, idea.challenges
        ),
    )
    .with_salient("idea_title", idea.title.clone())
    .with_salient("challenges", json!(idea.challenges))
    .with_salient("iterations", idea.history.len() as u64);
    match gateway.complete(&request) {
        Ok(record) => Ok((
            record.value["verdict"].as_bool().unwrap_or(false),
            record.value["rationale"].as_str().unwrap_or_default().to_string(),
        )),
        Err(PipelineError::StructuredOutput { detail, .. }) => {
            log::warn!("maturity verdict malformed after retries ({detail}); treating as not mature");
            Ok((false, format!("verdict unavailable: {detail}")))
        }
        Err(e) => Err(e),
    }
}

/// Iterative optimization: suggest → refine → judge until the idea is judged
/// mature or `max_iterations` is reached. Three consecutive refinement
/// failures return the best version so far, flagged degraded.
pub fn iterate_optimize(gateway: &Gateway, idea: Idea, max_iterations: u32) -> Result<Idea> {
    let mut current = idea;
    if max_iterations == 0 {
        return Ok(current);
    }
    let mut consecutive_failures = 0u32;
    let mut iteration = current.history.len() as u32;
    while iteration < max_iterations {
        if current.challenges.is_empty() {
            let (verdict, rationale) = judge_maturity(gateway, &current)?;
            if let Some(step) = current.history.last_mut() {
                step.maturity_verdict = verdict;
                step.verdict_rationale = rationale;
            }
            if verdict {
                current.maturity = Maturity::Mature;
            }
            return Ok(current);
        }

        let step = suggest_improvements(gateway, &current)
            .and_then(|suggestions| refine(gateway, &current, &suggestions));
        match step {
            Ok(mut refined) => {
                consecutive_failures = 0;
                let (verdict, rationale) = judge_maturity(gateway, &refined)?;
                if let Some(last) = refined.history.last_mut() {
                    last.maturity_verdict = verdict;
                    last.verdict_rationale = rationale;
                }
                current = refined;
                iteration = current.history.len() as u32;
                if verdict {
                    current.maturity = Maturity::Mature;
                    return Ok(current);
                }
            }
            Err(e) => {
                consecutive_failures += 1;
                log::warn!(
                    "refinement iteration {} failed ({e}); {consecutive_failures} consecutive failure(s)",
                    iteration + 1
                );
                if consecutive_failures >= 3 {
                    current.degraded = true;
                    if !current.history.is_empty() {
                        current.maturity = Maturity::Refined;
                    }
                    return Ok(current);
                }
            }
        }
    }
    current.maturity = Maturity::Refined;
    Ok(current)
}

/// Embedding texts for scoring a method set, falling back to the method name
/// when no richer text was retrieved.
pub fn method_embedding_texts(set: &MethodSet) -> Vec<String> {
    set.entries
        .iter()
        .map(|e| {
            if e.embedding_text.trim().is_empty() {
                e.method_name.clone()
            } else {
                e.embedding_text.clone()
            }
        })
        .collect()
}

/// How the denominator of S is populated: the retrieved E_m (default) or
/// every method extracted from the pre-dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionDenominator {
    #[default]
    Retrieved,
    FullPre,
}
