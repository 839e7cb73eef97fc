use std::fmt;

use serde::Serialize;

use super::PlanScript;
use crate::skills::SkillInvocation;
use crate::world::AgentId;

const HEADER: &str = "task:";

/// First syntax error in a script. Line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let expected: Vec<String> = self.expected.iter().map(|e| format!("'{e}'")).collect();
        write!(
            f,
            "line {}, column {}: expected {}, found {}",
            self.line,
            self.column,
            expected.join(" or "),
            self.found
        )
    }
}

impl std::error::Error for SyntaxError {}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Cursor {
    fn new(text: &str, line: usize) -> Self {
        Cursor {
            chars: text.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let found = match self.peek() {
            None => "end of line".to_string(),
            Some(c) if is_ident_char(c) => {
                let word: String = self.chars[self.pos..].iter().take_while(|c| is_ident_char(**c)).collect();
                format!("'{word}'")
            }
            Some(c) => format!("'{c}'"),
        };
        SyntaxError {
            line: self.line,
            column: self.pos + 1,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if is_ident_start(c) => {
                let start = self.pos;
                while self.peek().is_some_and(is_ident_char) {
                    self.pos += 1;
                }
                Ok(self.chars[start..self.pos].iter().collect())
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn id(&mut self) -> Result<String, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(&["object id"]));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn invocation(&mut self) -> Result<SkillInvocation, SyntaxError> {
        let first = self.ident("skill name")?;
        let agent_tag = AgentId::parse(&first);
        let (agent, skill) = if agent_tag.is_some() && self.eat(':') {
            (agent_tag, self.ident("skill name")?)
        } else {
            (None, first)
        };
        if !self.eat('(') {
            let expected: &[&str] = if agent_tag.is_some() && agent.is_none() { &[":", "("] } else { &["("] };
            return Err(self.error(expected));
        }
        let mut args = vec![self.id()?];
        loop {
            if self.eat(',') {
                args.push(self.id()?);
            } else if self.eat(')') {
                break;
            } else {
                return Err(self.error(&[",", ")"]));
            }
        }
        self.skip_ws();
        if self.peek().is_some_and(|c| c != '#') {
            return Err(self.error(&["end of line"]));
        }
        Ok(SkillInvocation { skill, args, agent })
    }
}

/// Parses a script. The error names the first offending token.
pub fn parse(text: &str) -> Result<PlanScript, SyntaxError> {
    let mut plan = PlanScript::default();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(desc) = comment.trim_start().strip_prefix(HEADER) {
                if !header_seen && plan.invocations.is_empty() {
                    plan.task_description = desc.trim().to_string();
                    header_seen = true;
                }
            }
            continue;
        }
        let mut cursor = Cursor::new(raw, i + 1);
        plan.invocations.push(cursor.invocation()?);
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_invocation() {
        let p = parse("SliceObject(Apple_1, Knife_1)").unwrap();
        assert_eq!(p.invocations, vec![SkillInvocation::new("SliceObject", &["Apple_1", "Knife_1"])]);
    }

    #[test]
    fn agent_prefixes() {
        let p = parse("robot: OpenObject(Fridge_1)\nhuman: SliceObject(Tomato_1, Knife_1)").unwrap();
        let agents: Vec<_> = p.invocations.iter().map(|i| i.agent).collect();
        assert_eq!(agents, vec![Some(AgentId::Robot), Some(AgentId::Human)]);
    }

    #[test]
    fn missing_paren_names_expected_token() {
        let e = parse("SliceObject Apple_1 Knife_1").unwrap_err();
        assert_eq!((e.line, e.column), (1, 13));
        assert_eq!(e.expected, vec!["("]);
        assert_eq!(e.to_string(), "line 1, column 13: expected '(', found 'Apple_1'");
        assert_eq!(parse("SliceObject Apple_1 Knife_1").unwrap_err(), e);
    }

    #[test]
    fn header_and_comments() {
        let p = parse("# task: make toast\n\n# a note\nSwitchOn(Toaster_1) # trailing\n").unwrap();
        assert_eq!(p.task_description, "make toast");
        assert_eq!(p.invocations.len(), 1);
    }

    #[test]
    fn errors_on_later_lines_carry_line_numbers() {
        let e = parse("OpenObject(Fridge_1)\nCloseObject(Fridge_1,)").unwrap_err();
        assert_eq!((e.line, e.column), (2, 22));
        assert_eq!(e.expected, vec!["object id"]);
        let e = parse("OpenObject(Fridge_1) extra").unwrap_err();
        assert_eq!(e.expected, vec!["end of line"]);
    }
}
