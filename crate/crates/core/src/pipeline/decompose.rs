use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::world::Scene;

/// A task description and its ordered subtasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Decomposition {
    pub task_description: String,
    pub subtasks: Vec<String>,
}

fn strip_prefix_ci<'a>(line: &'a str, prefix: &str) -> Option<&'a str> {
    let head = line.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &line[prefix.len()..])
}

fn list_item(line: &str) -> Option<&str> {
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return Some(rest);
        }
    }
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))
}

/// Reads `Task Description: ...` followed by `Subtasks:` and a numbered or
/// bulleted list. Markdown emphasis around the headers is tolerated.
pub fn parse_decomposition(reply: &str) -> Option<Decomposition> {
    let mut description = None;
    let mut subtasks = Vec::new();
    let mut in_list = false;
    for raw in reply.lines() {
        let line = raw.trim().trim_start_matches("**").replace("**", "");
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = strip_prefix_ci(line, "task description:") {
            if description.is_none() {
                description = Some(rest.trim().to_string());
            }
            in_list = false;
            continue;
        }
        if let Some(rest) = strip_prefix_ci(line, "subtasks:") {
            in_list = description.is_some();
            if let Some(item) = list_item(rest.trim()) {
                subtasks.push(item.trim().to_string());
            }
            continue;
        }
        if in_list {
            match list_item(line) {
                Some(item) if !item.trim().is_empty() => subtasks.push(item.trim().to_string()),
                _ if !subtasks.is_empty() => in_list = false,
                _ => {}
            }
        }
    }
    let task_description = description.filter(|d| !d.is_empty())?;
    (!subtasks.is_empty()).then_some(Decomposition {
        task_description,
        subtasks,
    })
}

/// Scene kinds mentioned in subtasks, and the subtasks that mention none.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KindMatches {
    pub kinds: Vec<String>,
    pub unmatched: Vec<String>,
}

/// "CounterTop" -> ["counter", "top"].
fn kind_words(kind: &str) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for c in kind.chars() {
        match words.last_mut() {
            Some(w) if !c.is_uppercase() => w.push(c.to_ascii_lowercase()),
            _ => words.push(c.to_ascii_lowercase().to_string()),
        }
    }
    words
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn word_matches(token: &str, word: &str) -> bool {
    token == word
        || token.strip_suffix('s') == Some(word)
        || token.strip_suffix("es") == Some(word)
}

fn mentions(tokens: &[String], kind: &str) -> bool {
    let words = kind_words(kind);
    let joined = words.concat();
    if tokens.iter().any(|t| word_matches(t, &joined)) {
        return true;
    }
    if words.len() < 2 {
        return false;
    }
    tokens.windows(words.len()).any(|w| {
        let last = words.len() - 1;
        w[..last].iter().zip(&words[..last]).all(|(t, k)| t == k) && word_matches(&w[last], &words[last])
    })
}

/// Case-insensitive, whole-word match of scene kind names against subtasks.
///
/// A kind matches as one word ("countertop") or as its camel-case parts
/// ("counter top"), with an optional plural ending.
pub fn extract_kinds(subtasks: &[String], scene: &Scene) -> KindMatches {
    let vocabulary = scene.kinds();
    let mut kinds = BTreeSet::new();
    let mut unmatched = Vec::new();
    for s in subtasks {
        let toks = tokens(s);
        let mut hit = false;
        for k in &vocabulary {
            if mentions(&toks, k) {
                kinds.insert(k.to_string());
                hit = true;
            }
        }
        if !hit {
            unmatched.push(s.clone());
        }
    }
    KindMatches {
        kinds: kinds.into_iter().collect(),
        unmatched,
    }
}
