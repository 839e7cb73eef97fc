//! Prompt templates with `{{name}}` placeholders.
//!
//! The bundled set is compiled in; [`Templates::load_dir`] overrides any of
//! them with `<name>.v1.txt` files from a directory.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {template}: no value for placeholder {placeholder}")]
    Unbound { template: String, placeholder: String },
    #[error("template {template}: unterminated placeholder")]
    Unterminated { template: String },
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    name: String,
    text: String,
}

impl Template {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Template {
            name: name.into(),
            text: text.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Substitutes every placeholder. Extra variables are ignored.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len() * 2);
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated {
                template: self.name.clone(),
            })?;
            let key = after[..end].trim();
            let value = vars
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::Unbound {
                    template: self.name.clone(),
                    placeholder: key.to_string(),
                })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

pub const TEMPLATE_NAMES: [&str; 7] = ["system", "decompose", "codegen", "repair", "revise", "refine", "allocate"];

/// The full set used by a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub system: Template,
    pub decompose: Template,
    pub codegen: Template,
    pub repair: Template,
    pub revise: Template,
    pub refine: Template,
    pub allocate: Template,
}

impl Default for Templates {
    fn default() -> Self {
        Templates::bundled()
    }
}

impl Templates {
    pub fn bundled() -> Templates {
        Templates {
            system: Template::new("system", include_str!("../prompts/system.v1.txt")),
            decompose: Template::new("decompose", include_str!("../prompts/decompose.v1.txt")),
            codegen: Template::new("codegen", include_str!("../prompts/codegen.v1.txt")),
            repair: Template::new("repair", include_str!("../prompts/repair.v1.txt")),
            revise: Template::new("revise", include_str!("../prompts/revise.v1.txt")),
            refine: Template::new("refine", include_str!("../prompts/refine.v1.txt")),
            allocate: Template::new("allocate", include_str!("../prompts/allocate.v1.txt")),
        }
    }

    /// Bundled templates, with any `<name>.v1.txt` found in `dir` taking precedence.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Templates, TemplateError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(TemplateError::Io {
                path: dir.display().to_string(),
                message: "not a directory".into(),
            });
        }
        let mut t = Templates::bundled();
        for name in TEMPLATE_NAMES {
            let path = dir.join(format!("{name}.v1.txt"));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            *t.slot(name) = Template::new(name, text);
        }
        Ok(t)
    }

    fn slot(&mut self, name: &str) -> &mut Template {
        match name {
            "system" => &mut self.system,
            "decompose" => &mut self.decompose,
            "codegen" => &mut self.codegen,
            "repair" => &mut self.repair,
            "revise" => &mut self.revise,
            "refine" => &mut self.refine,
            "allocate" => &mut self.allocate,
            _ => unreachable!("unknown template {name}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_and_reports_unbound() {
        let t = Template::new("t", "Hi {{ who }}, {{what}}.");
        assert_eq!(t.render(&[("who", "Ann"), ("what", "hello")]).unwrap(), "Hi Ann, hello.");
        assert_eq!(
            t.render(&[("who", "Ann")]),
            Err(TemplateError::Unbound {
                template: "t".into(),
                placeholder: "what".into()
            })
        );
    }

    #[test]
    fn directory_overrides_single_template() {
        let dir = std::env::temp_dir().join(format!("taskweave-templates-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("refine.v1.txt"), "custom {{error}}").unwrap();
        let t = Templates::load_dir(&dir).unwrap();
        assert_eq!(t.refine.text(), "custom {{error}}");
        assert_eq!(t.codegen, Templates::bundled().codegen);
        std::fs::remove_dir_all(dir).ok();
    }
}
