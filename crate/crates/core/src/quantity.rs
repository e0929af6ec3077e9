//! Count extraction from free text.
//!
//! [`QuantityParser`] finds count-like quantities: digit numbers (with
//! thousands separators and decimals), English number words up to billions,
//! scale words applied multiplicatively, hedge and bound phrases, and ranges.
//! Numbers directly followed by a measurement unit from the [`UnitStoplist`]
//! are measurements and are skipped.
//!
//! [`split_cnp`] separates an answer span into its count and the noun phrase
//! the count modifies ("17 regional languages" -> 17, "regional languages").

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_traits::CheckedMul;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::corpus::SpanRef;
use crate::count::{parse_rational, Count, Rational};
use crate::text;

const DEFAULT_UNITS: &str = include_str!("../data/units.txt");

/// How a count relates to the true number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modifier {
    Exact,
    Approximate,
    AtLeast,
    AtMost,
    Range,
}

impl fmt::Display for Modifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modifier::Exact => "exact",
            Modifier::Approximate => "approximate",
            Modifier::AtLeast => "at_least",
            Modifier::AtMost => "at_most",
            Modifier::Range => "range",
        })
    }
}

/// A normalized count with its hedge and the text it was read from.
///
/// For ranges `value` is the midpoint of `bounds`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: Count,
    pub modifier: Modifier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(Count, Count)>,
    #[serde(default)]
    pub surface: String,
}

impl Quantity {
    pub fn exact(value: Count) -> Self {
        Quantity { value, modifier: Modifier::Exact, bounds: None, surface: value.to_string() }
    }

    /// Builds a range quantity, `None` unless `lo <= hi`.
    pub fn range(lo: Count, hi: Count, surface: impl Into<String>) -> Option<Self> {
        (lo <= hi).then(|| Quantity {
            value: Count::midpoint(&lo, &hi),
            modifier: Modifier::Range,
            bounds: Some((lo, hi)),
            surface: surface.into(),
        })
    }
}

/// A quantity located in the text it was parsed from (byte offsets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantityMatch {
    pub quantity: Quantity,
    pub start: usize,
    pub end: usize,
}

/// An answer span split into its count and the noun phrase it modifies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSpan {
    pub quantity: Quantity,
    /// Possibly empty.
    pub modifier_phrase: String,
    /// Substring covering the quantity surface and the modifier phrase.
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<SpanRef>,
}

/// Tokens that mark a number as a measurement rather than a count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitStoplist {
    tokens: HashSet<String>,
}

impl UnitStoplist {
    pub fn from_lines(contents: &str) -> Self {
        let tokens = contents
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        UnitStoplist { tokens }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::from_lines(&std::fs::read_to_string(path)?))
    }

    pub fn empty() -> Self {
        UnitStoplist { tokens: HashSet::new() }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// True if the text mentions a stoplisted unit.
    ///
    /// Single-letter alphabetic units ("m", "g") are ignored here: in a query
    /// they are far more often initials than units.
    pub fn mentions_unit(&self, text: &str) -> bool {
        lex(text).iter().any(|t| match &t.kind {
            Kind::Word(w) => w.chars().count() > 1 && self.contains(w),
            Kind::Sym(c) => self.contains(&c.to_string()),
            Kind::Num(_) => false,
        })
    }
}

impl Default for UnitStoplist {
    fn default() -> Self {
        Self::from_lines(DEFAULT_UNITS)
    }
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(String),
    Word(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    start: usize,
    end: usize,
}

impl Token {
    fn word(&self) -> Option<&str> {
        match &self.kind {
            Kind::Word(w) => Some(w),
            _ => None,
        }
    }

    fn is_word(&self, w: &str) -> bool {
        self.word() == Some(w)
    }

    fn is_sym(&self, c: char) -> bool {
        self.kind == Kind::Sym(c)
    }
}

fn lex(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let digit_at = |i: usize| chars.get(i).is_some_and(|&(_, c)| c.is_ascii_digit());
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while digit_at(i) {
                i += 1;
            }
            // thousands groups, only after a leading group of at most 3 digits
            if i - start <= 3 {
                while chars.get(i).is_some_and(|&(_, c)| c == ',')
                    && (1..=3).all(|k| digit_at(i + k))
                    && !digit_at(i + 4)
                {
                    i += 4;
                }
            }
            if chars.get(i).is_some_and(|&(_, c)| c == '.') && digit_at(i + 1) {
                i += 1;
                while digit_at(i) {
                    i += 1;
                }
            }
            let (s, e) = (byte_at(start), byte_at(i));
            tokens.push(Token { kind: Kind::Num(text[s..e].to_string()), start: s, end: e });
        } else if c.is_alphabetic() {
            let start = i;
            while chars.get(i).is_some_and(|&(_, c)| c.is_alphabetic()) {
                i += 1;
            }
            let (s, e) = (byte_at(start), byte_at(i));
            tokens.push(Token { kind: Kind::Word(text[s..e].to_lowercase()), start: s, end: e });
        } else {
            let (s, e) = (byte_at(i), byte_at(i + 1));
            tokens.push(Token { kind: Kind::Sym(c), start: s, end: e });
            i += 1;
        }
    }
    tokens
}

// ---------------------------------------------------------------------------
// grammar tables

fn unit_word(w: &str) -> Option<i128> {
    Some(match w {
        "zero" => 0,
        "one" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        _ => return None,
    })
}

fn teen_word(w: &str) -> Option<i128> {
    Some(match w {
        "ten" => 10,
        "eleven" => 11,
        "twelve" => 12,
        "thirteen" => 13,
        "fourteen" => 14,
        "fifteen" => 15,
        "sixteen" => 16,
        "seventeen" => 17,
        "eighteen" => 18,
        "nineteen" => 19,
        _ => return None,
    })
}

fn tens_word(w: &str) -> Option<i128> {
    Some(match w {
        "twenty" => 20,
        "thirty" => 30,
        "forty" => 40,
        "fifty" => 50,
        "sixty" => 60,
        "seventy" => 70,
        "eighty" => 80,
        "ninety" => 90,
        _ => return None,
    })
}

fn scale_word(w: &str) -> Option<i128> {
    Some(match w {
        "hundred" => 100,
        "thousand" => 1_000,
        "million" => 1_000_000,
        "billion" => 1_000_000_000,
        _ => return None,
    })
}

fn is_number_word(w: &str) -> bool {
    unit_word(w).is_some() || teen_word(w).is_some() || tens_word(w).is_some() || scale_word(w).is_some()
}

const HEDGES: &[(&[&str], Modifier)] = &[
    (&["approximately"], Modifier::Approximate),
    (&["approx"], Modifier::Approximate),
    (&["about"], Modifier::Approximate),
    (&["around"], Modifier::Approximate),
    (&["almost"], Modifier::Approximate),
    (&["nearly"], Modifier::Approximate),
    (&["roughly"], Modifier::Approximate),
    (&["some"], Modifier::Approximate),
    (&["estimated"], Modifier::Approximate),
    (&["circa"], Modifier::Approximate),
    (&["close", "to"], Modifier::Approximate),
    (&["more", "than"], Modifier::AtLeast),
    (&["over"], Modifier::AtLeast),
    (&["at", "least"], Modifier::AtLeast),
    (&["upwards", "of"], Modifier::AtLeast),
    (&["in", "excess", "of"], Modifier::AtLeast),
    (&["greater", "than"], Modifier::AtLeast),
    (&["no", "fewer", "than"], Modifier::AtLeast),
    (&["no", "less", "than"], Modifier::AtLeast),
    (&["above"], Modifier::AtLeast),
    (&["fewer", "than"], Modifier::AtMost),
    (&["less", "than"], Modifier::AtMost),
    (&["under"], Modifier::AtMost),
    (&["up", "to"], Modifier::AtMost),
    (&["at", "most"], Modifier::AtMost),
    (&["no", "more", "than"], Modifier::AtMost),
    (&["not", "more", "than"], Modifier::AtMost),
    (&["below"], Modifier::AtMost),
];

/// Words stripped from the front of a modifier phrase.
const LEADING_NOISE: &[&str] = &[
    "a", "an", "the", "approximately", "approx", "about", "around", "almost", "nearly", "roughly",
    "some", "estimated", "circa", "over", "under", "just",
];

/// Non-stopword tokens that end a noun phrase (mostly participles).
const PHRASE_BREAKS: &[&str] = &[
    "spoken", "written", "wrote", "write", "writes", "released", "recorded", "used", "known",
    "called", "named", "living", "located", "based", "born", "published", "produced", "made",
    "created", "listed", "registered", "recognised", "recognized", "including", "include",
    "includes", "included", "according", "across", "among", "within", "without", "like", "via",
    "said", "says", "remain", "remains", "exist", "exists", "existed", "make", "makes", "total",
    "altogether", "worldwide", "today", "currently", "now", "ever", "plus",
];

fn breaks_phrase(word: &str) -> bool {
    text::is_stopword(word) || PHRASE_BREAKS.contains(&word) || is_number_word(word)
}

fn is_dash(t: &Token) -> bool {
    matches!(t.kind, Kind::Sym('-' | '\u{2013}' | '\u{2014}'))
}

// ---------------------------------------------------------------------------
// parser

/// A parsed number before modifiers: value, token range, trailing scale.
#[derive(Debug, Clone, Copy)]
struct Numeral {
    value: Rational,
    first: usize,
    /// One past the last token.
    next: usize,
    scale: Option<Rational>,
}

/// Stateless count parser configured with a unit stoplist.
#[derive(Debug, Clone, Default)]
pub struct QuantityParser {
    units: UnitStoplist,
}

static DEFAULT_PARSER: Lazy<QuantityParser> = Lazy::new(QuantityParser::default);

/// Parses the first count in `text` with the bundled unit stoplist.
pub fn parse_quantity(text: &str) -> Option<Quantity> {
    DEFAULT_PARSER.parse(text)
}

/// Splits an answer span into count and modifier phrase with the bundled
/// unit stoplist.
pub fn split_cnp(span_text: &str) -> Option<CountSpan> {
    DEFAULT_PARSER.split_cnp(span_text)
}

impl QuantityParser {
    pub fn new(units: UnitStoplist) -> Self {
        QuantityParser { units }
    }

    pub fn units(&self) -> &UnitStoplist {
        &self.units
    }

    /// The first count-like quantity in `text`.
    pub fn parse(&self, text: &str) -> Option<Quantity> {
        self.find_first(text).map(|m| m.quantity)
    }

    pub fn find_first(&self, text: &str) -> Option<QuantityMatch> {
        let tokens = lex(text);
        self.scan(text, &tokens, 0).map(|(m, _, _)| m)
    }

    /// All non-overlapping counts, left to right.
    pub fn find_all(&self, text: &str) -> Vec<QuantityMatch> {
        let tokens = lex(text);
        let mut out = Vec::new();
        let mut from = 0;
        while let Some((m, _, next)) = self.scan(text, &tokens, from) {
            out.push(m);
            from = next;
        }
        out
    }

    /// Separates the first count in `span_text` from the noun phrase it
    /// modifies. The phrase following the count is preferred; the phrase
    /// preceding it is used when nothing follows.
    pub fn split_cnp(&self, span_text: &str) -> Option<CountSpan> {
        let tokens = lex(span_text);
        let (m, first, next) = self.scan(span_text, &tokens, 0)?;
        let phrase = phrase_after(&tokens, next).or_else(|| phrase_before(&tokens, first));
        let (modifier_phrase, text) = match phrase {
            Some((a, b)) => {
                let lo = a.min(m.start);
                let hi = b.max(m.end);
                (span_text[a..b].to_string(), span_text[lo..hi].to_string())
            }
            None => (String::new(), m.quantity.surface.clone()),
        };
        Some(CountSpan { quantity: m.quantity, modifier_phrase, text, source_span: None })
    }

    /// Finds the first quantity starting at or after token `from`.
    /// Returns the match with its first token and one-past-last token.
    fn scan(&self, text: &str, tokens: &[Token], from: usize) -> Option<(QuantityMatch, usize, usize)> {
        let mut i = from;
        while i < tokens.len() {
            if let Some(found) = self.parse_at(text, tokens, i) {
                return Some(found);
            }
            i += 1;
        }
        None
    }

    fn parse_at(&self, text: &str, tokens: &[Token], i: usize) -> Option<(QuantityMatch, usize, usize)> {
        // "between A and B", "from A to B"
        if tokens[i].is_word("between") || tokens[i].is_word("from") {
            let joiner = if tokens[i].is_word("between") { "and" } else { "to" };
            let lo = numeral(tokens, i + 1)?;
            let conn = tokens.get(lo.next)?;
            if !conn.is_word(joiner) {
                return None;
            }
            let hi = numeral(tokens, lo.next + 1)?;
            return self.finish_range(text, tokens, i, lo, hi);
        }
        if tokens[i].is_sym('~') {
            let num = numeral(tokens, i + 1)?;
            return self.finish(text, tokens, i, num, Modifier::Approximate);
        }
        if let Some((len, modifier)) = hedge_at(tokens, i) {
            if let Some(num) = numeral(tokens, i + len) {
                return self.finish(text, tokens, i, num, modifier);
            }
            return None;
        }
        let num = numeral(tokens, i)?;
        self.finish(text, tokens, i, num, Modifier::Exact)
    }

    /// Applies range / suffix rules after a numeral and checks units.
    fn finish(
        &self,
        text: &str,
        tokens: &[Token],
        first: usize,
        num: Numeral,
        hedge: Modifier,
    ) -> Option<(QuantityMatch, usize, usize)> {
        if self.preceded_by_unit(tokens, num.first) {
            return None;
        }
        if let Some(conn) = tokens.get(num.next) {
            let connects = conn.is_word("to") || conn.is_word("or") || is_dash(conn);
            if connects {
                if let Some(hi) = numeral(tokens, num.next + 1) {
                    if let Some(found) = self.finish_range(text, tokens, first, num, hi) {
                        return Some(found);
                    }
                }
            }
        }
        let mut next = num.next;
        let mut modifier = hedge;
        if let Some(t) = tokens.get(next) {
            if t.is_sym('+') && t.start == tokens[next - 1].end {
                modifier = Modifier::AtLeast;
                next += 1;
            } else if t.is_word("or") {
                let suffix = tokens.get(next + 1).and_then(Token::word);
                let m = match suffix {
                    Some("more") => Some(Modifier::AtLeast),
                    Some("so") => Some(Modifier::Approximate),
                    Some("fewer" | "less") => Some(Modifier::AtMost),
                    _ => None,
                };
                if let Some(m) = m {
                    modifier = m;
                    next += 2;
                }
            }
        }
        if self.followed_by_unit(tokens, num.next) {
            return None;
        }
        let value = Count::new(num.value)?;
        let (start, end) = (tokens[first].start, tokens[next - 1].end);
        let quantity = Quantity { value, modifier, bounds: None, surface: text[start..end].to_string() };
        Some((QuantityMatch { quantity, start, end }, first, next))
    }

    fn finish_range(
        &self,
        text: &str,
        tokens: &[Token],
        first: usize,
        lo: Numeral,
        hi: Numeral,
    ) -> Option<(QuantityMatch, usize, usize)> {
        if self.preceded_by_unit(tokens, lo.first)
            || self.followed_by_unit(tokens, lo.next)
            || self.followed_by_unit(tokens, hi.next)
        {
            return None;
        }
        let mut lo_value = lo.value;
        // "2 to 3 million": the trailing scale also applies to the lower bound
        if let (None, Some(scale)) = (lo.scale, hi.scale) {
            if lo_value * scale <= hi.value {
                lo_value *= scale;
            }
        }
        let (start, end) = (tokens[first].start, tokens[hi.next - 1].end);
        let quantity = Quantity::range(Count::new(lo_value)?, Count::new(hi.value)?, &text[start..end])?;
        Some((QuantityMatch { quantity, start, end }, first, hi.next))
    }

    fn followed_by_unit(&self, tokens: &[Token], next: usize) -> bool {
        match tokens.get(next).map(|t| &t.kind) {
            Some(Kind::Word(w)) => self.units.contains(w),
            Some(Kind::Sym(c)) => self.units.contains(&c.to_string()),
            _ => false,
        }
    }

    /// Currency-style symbols written before the number ("$5").
    fn preceded_by_unit(&self, tokens: &[Token], first: usize) -> bool {
        first > 0
            && matches!(&tokens[first - 1].kind, Kind::Sym(c) if self.units.contains(&c.to_string()))
    }
}

fn hedge_at(tokens: &[Token], i: usize) -> Option<(usize, Modifier)> {
    HEDGES
        .iter()
        .filter(|(words, _)| {
            words.iter().enumerate().all(|(k, w)| tokens.get(i + k).is_some_and(|t| t.is_word(w)))
        })
        .max_by_key(|(words, _)| words.len())
        .map(|(words, m)| (words.len(), *m))
}

/// A digit or word numeral starting at token `i`.
fn numeral(tokens: &[Token], i: usize) -> Option<Numeral> {
    let tok = tokens.get(i)?;
    match &tok.kind {
        Kind::Num(digits) => {
            // glued to letters: ordinals, model names, "5km"
            let glued_after = tokens.get(i + 1).is_some_and(|t| t.start == tok.end && t.word().is_some());
            let glued_before = i > 0 && tokens[i - 1].end == tok.start && tokens[i - 1].word().is_some();
            // part of a longer numeric token such as "3.1.4" or "12:30"
            let glued_sym = tokens.get(i + 1).is_some_and(|t| {
                t.start == tok.end
                    && matches!(t.kind, Kind::Sym('.' | ':' | '/' | ','))
                    && tokens.get(i + 2).is_some_and(|n| n.start == t.end && matches!(n.kind, Kind::Num(_)))
            });
            if glued_after || glued_before || glued_sym {
                return None;
            }
            let mut value = parse_rational(digits)?;
            let mut next = i + 1;
            let mut scale = None;
            while let Some(s) = tokens.get(next).and_then(Token::word).and_then(scale_word) {
                let s = Rational::from_integer(s);
                value = value.checked_mul(&s)?;
                scale = Some(scale.map_or(s, |p: Rational| p * s));
                next += 1;
            }
            Some(Numeral { value, first: i, next, scale })
        }
        Kind::Word(_) => word_numeral(tokens, i),
        Kind::Sym(_) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Last {
    None,
    Article,
    Unit,
    Teen,
    Tens,
    Hundred,
    Scale,
    And,
}

/// English number words: "five", "twenty-five", "two hundred and six",
/// "a million", "three billion four hundred thousand".
fn word_numeral(tokens: &[Token], i: usize) -> Option<Numeral> {
    let mut total: i128 = 0;
    let mut current: i128 = 0;
    let mut last = Last::None;
    let mut last_scale = i128::MAX;
    let mut end_tok = None;
    let mut k = i;
    while let Some(tok) = tokens.get(k) {
        let next_is_number_word =
            || tokens.get(k + 1).and_then(Token::word).is_some_and(|w| unit_word(w).is_some() || teen_word(w).is_some() || tens_word(w).is_some());
        match &tok.kind {
            Kind::Word(w) if (w == "a" || w == "an") && last == Last::None => {
                let followed_by_scale = tokens.get(k + 1).and_then(Token::word).and_then(scale_word).is_some();
                if !followed_by_scale {
                    break;
                }
                current = 1;
                last = Last::Article;
            }
            Kind::Word(w) if unit_word(w).is_some() => {
                if !matches!(last, Last::None | Last::Tens | Last::Hundred | Last::Scale | Last::And) {
                    break;
                }
                current += unit_word(w)?;
                last = Last::Unit;
                end_tok = Some(k);
            }
            Kind::Word(w) if teen_word(w).is_some() => {
                if !matches!(last, Last::None | Last::Hundred | Last::Scale | Last::And) {
                    break;
                }
                current += teen_word(w)?;
                last = Last::Teen;
                end_tok = Some(k);
            }
            Kind::Word(w) if tens_word(w).is_some() => {
                if !matches!(last, Last::None | Last::Hundred | Last::Scale | Last::And) {
                    break;
                }
                current += tens_word(w)?;
                last = Last::Tens;
                end_tok = Some(k);
            }
            Kind::Word(w) if w == "hundred" => {
                if !matches!(last, Last::Unit | Last::Teen | Last::Tens | Last::Article) || current % 100 == 0 && current != 0 && last != Last::Article {
                    break;
                }
                current *= 100;
                last = Last::Hundred;
                end_tok = Some(k);
            }
            Kind::Word(w) if scale_word(w).is_some() => {
                let s = scale_word(w)?;
                if !matches!(last, Last::Unit | Last::Teen | Last::Tens | Last::Hundred | Last::Article) || s >= last_scale {
                    break;
                }
                total += current.checked_mul(s)?;
                current = 0;
                last_scale = s;
                last = Last::Scale;
                end_tok = Some(k);
            }
            Kind::Word(w) if w == "and" => {
                if !matches!(last, Last::Hundred | Last::Scale) || !next_is_number_word() {
                    break;
                }
                last = Last::And;
            }
            Kind::Sym('-') => {
                let unit_follows = tokens.get(k + 1).and_then(Token::word).and_then(unit_word).is_some();
                let glued = k > 0 && tokens[k - 1].end == tok.start && tokens.get(k + 1).is_some_and(|n| n.start == tok.end);
                if last != Last::Tens || !unit_follows || !glued {
                    break;
                }
            }
            _ => break,
        }
        k += 1;
    }
    let end_tok = end_tok?;
    let value = Rational::from_integer(total + current);
    let scale = match tokens[end_tok].word().and_then(scale_word) {
        Some(s) if end_tok > i => Some(Rational::from_integer(s)),
        _ => None,
    };
    Some(Numeral { value, first: i, next: end_tok + 1, scale })
}

/// Noun phrase starting at token `next` (byte range).
fn phrase_after(tokens: &[Token], next: usize) -> Option<(usize, usize)> {
    let mut k = next;
    while tokens.get(k).and_then(Token::word).is_some_and(|w| LEADING_NOISE.contains(&w)) {
        k += 1;
    }
    let mut words = 0;
    let (mut start, mut end) = (None, None);
    let mut joined = false;
    while let Some(tok) = tokens.get(k) {
        match tok.word() {
            Some(w) if joined || !breaks_phrase(w) => {
                joined = false;
                start.get_or_insert(tok.start);
                end = Some(tok.end);
                words += 1;
                k += 1;
                if words == 6 {
                    break;
                }
                if let (Some(dash), Some(after)) = (tokens.get(k), tokens.get(k + 1)) {
                    if dash.is_sym('-') && dash.start == tok.end && after.start == dash.end && after.word().is_some() {
                        k += 1;
                        joined = true;
                    }
                }
            }
            _ => break,
        }
    }
    Some((start?, end?))
}

/// Noun phrase ending right before token `first` (byte range).
fn phrase_before(tokens: &[Token], first: usize) -> Option<(usize, usize)> {
    let mut picked: Vec<usize> = Vec::new();
    let mut k = first;
    while k > 0 && picked.len() < 6 {
        let tok = &tokens[k - 1];
        match tok.word() {
            Some(w) if !breaks_phrase(w) => {
                picked.push(k - 1);
                k -= 1;
            }
            _ => break,
        }
    }
    picked.reverse();
    let keep: Vec<usize> = picked
        .into_iter()
        .skip_while(|&k| tokens[k].word().is_some_and(|w| LEADING_NOISE.contains(&w)))
        .collect();
    Some((tokens[*keep.first()?].start, tokens[*keep.last()?].end))
}

impl FromStr for Quantity {
    type Err = String;

    /// Parses a whole string as one quantity.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_quantity(s).ok_or_else(|| format!("no count in {s:?}"))
    }
}
