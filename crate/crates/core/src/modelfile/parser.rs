use std::collections::{BTreeMap, HashMap, HashSet};

use super::lexer::{tokenize, Token, TokenKind};
use super::{ParseDiagnostic, SourceSpan};
use crate::model::{
    paths, validate, Alternative, CompatibilityTable, CompositePart, Criterion, LeafPart,
    ModelConfig, Orientation, Part, SystemModel,
};

/// Syntax errors abort the parse; semantic problems are collected.
struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    spans: HashMap<String, SourceSpan>,
    diags: Vec<ParseDiagnostic>,
}

type PResult<T> = Result<T, ParseDiagnostic>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseDiagnostic {
        let t = self.peek();
        ParseDiagnostic::error(
            t.span,
            format!("expected {wanted}, found {}", t.kind.describe()),
        )
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<SourceSpan> {
        if self.peek().kind == kind {
            Ok(self.next().span)
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.at_keyword(kw) {
            Ok(self.next().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                Ok((s, self.next().span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn opt_string(&mut self) -> Option<String> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                self.next();
                Some(s)
            }
            _ => None,
        }
    }

    fn number(&mut self) -> PResult<(String, SourceSpan)> {
        match &self.peek().kind {
            TokenKind::Number(s) => {
                let s = s.clone();
                Ok((s, self.next().span))
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn int<T: std::str::FromStr>(&mut self, what: &str) -> PResult<(Option<T>, SourceSpan)> {
        let (text, span) = self.number()?;
        match text.parse::<T>() {
            Ok(v) => Ok((Some(v), span)),
            Err(_) => {
                self.diags.push(ParseDiagnostic::error(
                    span,
                    format!("{what} must be an integer, found `{text}`"),
                ));
                Ok((None, span))
            }
        }
    }

    fn float(&mut self, what: &str) -> PResult<(Option<f64>, SourceSpan)> {
        let (text, span) = self.number()?;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((Some(v), span)),
            _ => {
                self.diags.push(ParseDiagnostic::error(
                    span,
                    format!("{what} must be a finite number, found `{text}`"),
                ));
                Ok((None, span))
            }
        }
    }

    fn model(&mut self) -> PResult<SystemModel> {
        let start = self.keyword("system")?;
        self.spans.insert("system".into(), start);
        let (id, _) = self.ident()?;
        let name = match self.opt_string() {
            Some(s) => s,
            None => return Err(self.unexpected("system name string")),
        };
        self.expect(TokenKind::LBrace)?;
        let config = if self.at_keyword("config") {
            self.config()?
        } else {
            ModelConfig::default()
        };
        let criteria = self.criteria()?;
        let root = self.part(None)?;
        let mut compat = Vec::new();
        while self.at_keyword("compat") {
            compat.push(self.compat()?);
        }
        self.expect(TokenKind::RBrace)?;
        self.expect(TokenKind::Eof)?;
        Ok(SystemModel {
            id,
            name,
            config,
            criteria,
            root,
            compat,
        })
    }

    fn config(&mut self) -> PResult<ModelConfig> {
        self.keyword("config")?;
        self.expect(TokenKind::LBrace)?;
        let mut cfg = ModelConfig::default();
        let mut seen = HashSet::new();
        while self.peek().kind != TokenKind::RBrace {
            let (key, span) = self.ident()?;
            self.expect(TokenKind::Eq)?;
            if !seen.insert(key.clone()) {
                self.diags.push(ParseDiagnostic::error(
                    span,
                    format!("duplicate config key `{key}`"),
                ));
            }
            self.spans.insert(paths::config(&key), span);
            match key.as_str() {
                "k" => {
                    if let (Some(v), _) = self.int::<u32>("k")? {
                        cfg.k = v;
                    }
                }
                "l" => {
                    if let (Some(v), _) = self.int::<u32>("l")? {
                        cfg.l = v;
                    }
                }
                "default_compat" => {
                    if let (Some(v), _) = self.int::<u32>("default_compat")? {
                        cfg.default_compat = v;
                    }
                }
                "concordance_p" => {
                    if let (Some(v), _) = self.float("concordance_p")? {
                        cfg.concordance_p = v;
                    }
                }
                "discordance_q" => {
                    if let (Some(v), _) = self.float("discordance_q")? {
                        cfg.discordance_q = v;
                    }
                }
                other => {
                    self.diags.push(ParseDiagnostic::error(
                        span,
                        format!("unknown config key `{other}`"),
                    ));
                    self.number()?;
                }
            }
            self.expect(TokenKind::Semi)?;
        }
        self.expect(TokenKind::RBrace)?;
        Ok(cfg)
    }

    fn criteria(&mut self) -> PResult<Vec<Criterion>> {
        let span = self.keyword("criteria")?;
        self.spans.insert("criteria".into(), span);
        self.expect(TokenKind::LBrace)?;
        let mut out = Vec::new();
        loop {
            self.keyword("criterion")?;
            let (id, span) = self.ident()?;
            self.spans.insert(paths::criterion(&id), span);
            let label = self.opt_string().unwrap_or_default();
            let orientation = if self.at_keyword("maximize") {
                self.next();
                Orientation::Maximize
            } else if self.at_keyword("minimize") {
                self.next();
                Orientation::Minimize
            } else {
                return Err(self.unexpected("`maximize` or `minimize`"));
            };
            self.keyword("scale")?;
            let (lo, _) = self.int::<i64>("scale bound")?;
            self.expect(TokenKind::DotDot)?;
            let (hi, _) = self.int::<i64>("scale bound")?;
            self.expect(TokenKind::Semi)?;
            out.push(Criterion {
                id,
                label,
                orientation,
                scale_lo: lo.unwrap_or(0),
                scale_hi: hi.unwrap_or(1),
            });
            if self.peek().kind == TokenKind::RBrace {
                break;
            }
        }
        self.expect(TokenKind::RBrace)?;
        Ok(out)
    }

    fn part(&mut self, parent: Option<&str>) -> PResult<Part> {
        if self.at_keyword("part") {
            self.next();
            let (id, span) = self.ident()?;
            let path = paths::part(parent, &id);
            self.spans.insert(path.clone(), span);
            let label = self.opt_string().unwrap_or_default();
            let weights = if self.at_keyword("weights") {
                let span = self.next().span;
                self.spans.insert(paths::weights(&path), span);
                let list_span = self.expect(TokenKind::LBracket)?;
                self.spans.insert(paths::weights(&path), list_span);
                let mut ws = Vec::new();
                loop {
                    let (v, span) = self.float("weight")?;
                    self.spans.insert(paths::weight(&path, ws.len()), span);
                    ws.push(v.unwrap_or(0.0));
                    if self.peek().kind == TokenKind::Comma {
                        self.next();
                    } else {
                        break;
                    }
                }
                self.expect(TokenKind::RBracket)?;
                Some(ws)
            } else {
                None
            };
            self.expect(TokenKind::LBrace)?;
            let mut children = Vec::new();
            while self.peek().kind != TokenKind::RBrace {
                children.push(self.part(Some(&path))?);
            }
            self.expect(TokenKind::RBrace)?;
            Ok(Part::Composite(CompositePart {
                id,
                label,
                weights,
                children,
            }))
        } else if self.at_keyword("leaf") {
            self.next();
            let (id, span) = self.ident()?;
            let path = paths::part(parent, &id);
            self.spans.insert(path.clone(), span);
            let label = self.opt_string().unwrap_or_default();
            self.expect(TokenKind::LBrace)?;
            let mut alternatives = Vec::new();
            while self.peek().kind != TokenKind::RBrace {
                alternatives.push(self.alt(&path)?);
            }
            self.expect(TokenKind::RBrace)?;
            Ok(Part::Leaf(LeafPart {
                id,
                label,
                alternatives,
            }))
        } else {
            Err(self.unexpected("`part` or `leaf`"))
        }
    }

    fn alt(&mut self, leaf_path: &str) -> PResult<Alternative> {
        self.keyword("alt")?;
        let (id, span) = self.ident()?;
        let path = paths::alt(leaf_path, &id);
        self.spans.insert(path.clone(), span);
        let label = self.opt_string().unwrap_or_default();
        self.keyword("est")?;
        let list = self.expect(TokenKind::LBracket)?;
        self.spans.insert(paths::estimates(&path), list);
        let mut estimates = Vec::new();
        loop {
            let (v, span) = self.int::<i64>("estimate")?;
            self.spans
                .insert(paths::estimate(&path, estimates.len()), span);
            estimates.push(v.unwrap_or(i64::MIN));
            if self.peek().kind == TokenKind::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(TokenKind::RBracket)?;
        let given_priority = if self.at_keyword("priority") {
            self.next();
            let (v, span) = self.int::<u32>("priority")?;
            self.spans.insert(paths::priority(&path), span);
            Some(v.unwrap_or(0))
        } else {
            None
        };
        self.expect(TokenKind::Semi)?;
        Ok(Alternative {
            id,
            label,
            estimates,
            given_priority,
        })
    }

    fn compat(&mut self) -> PResult<CompatibilityTable> {
        let span = self.keyword("compat")?;
        let (a, _) = self.ident()?;
        self.expect(TokenKind::Star)?;
        let (b, _) = self.ident()?;
        self.spans.insert(paths::compat(&a, &b), span);
        self.expect(TokenKind::LBrace)?;
        let mut entries = BTreeMap::new();
        loop {
            let (x, xspan) = self.ident()?;
            self.expect(TokenKind::Comma)?;
            let (y, _) = self.ident()?;
            self.expect(TokenKind::Eq)?;
            let (v, _) = self.int::<u32>("compatibility level")?;
            self.expect(TokenKind::Semi)?;
            self.spans
                .insert(paths::compat_entry(&a, &b, &x, &y), xspan);
            if entries
                .insert((x.clone(), y.clone()), v.unwrap_or(0))
                .is_some()
            {
                self.diags.push(ParseDiagnostic::error(
                    xspan,
                    format!("duplicate compatibility entry ({x}, {y})"),
                ));
            }
            if self.peek().kind == TokenKind::RBrace {
                break;
            }
        }
        self.expect(TokenKind::RBrace)?;
        Ok(CompatibilityTable {
            leaf_a: a,
            leaf_b: b,
            entries,
        })
    }

    /// Span of the longest recorded prefix of a model path.
    fn span_for(&self, path: &str) -> SourceSpan {
        let mut p = path;
        loop {
            if let Some(s) = self.spans.get(p) {
                return *s;
            }
            match p.rfind(['.', '/', ':', '(', '[']) {
                Some(i) if i > 0 => p = &p[..i],
                _ => return self.spans.get("system").copied().unwrap_or_default(),
            }
        }
    }
}

pub fn parse(text: &str) -> Result<SystemModel, Vec<ParseDiagnostic>> {
    let tokens = tokenize(text).map_err(|d| vec![d])?;
    let mut p = Parser {
        tokens,
        pos: 0,
        spans: HashMap::new(),
        diags: Vec::new(),
    };
    let model = match p.model() {
        Ok(m) => m,
        Err(d) => {
            let mut diags = std::mem::take(&mut p.diags);
            diags.push(d);
            return Err(diags);
        }
    };
    let mut diags = std::mem::take(&mut p.diags);
    if diags.is_empty() {
        for d in validate(&model) {
            diags.push(ParseDiagnostic {
                span: p.span_for(&d.path),
                message: d.message,
                severity: d.severity,
            });
        }
    }
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}
