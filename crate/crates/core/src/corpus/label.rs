use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Classification regime of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Multiclass,
    Binary,
}

impl Mode {
    /// Labels of this mode in row order for reports (irony always first).
    pub fn labels(self) -> &'static [Label] {
        match self {
            Mode::Multiclass => &[Label::Ironia, Label::Negativo, Label::Neutro, Label::Positivo],
            Mode::Binary => &[Label::Ironia, Label::NoIronia],
        }
    }

    pub fn num_classes(self) -> usize {
        self.labels().len()
    }

    /// Label whose `category_encoded` value is `index`.
    pub fn label_for_index(self, index: usize) -> Option<Label> {
        match (self, index) {
            (Mode::Multiclass, 0) => Some(Label::Ironia),
            (Mode::Multiclass, 1) => Some(Label::Negativo),
            (Mode::Multiclass, 2) => Some(Label::Neutro),
            (Mode::Multiclass, 3) => Some(Label::Positivo),
            (Mode::Binary, 0) => Some(Label::NoIronia),
            (Mode::Binary, 1) => Some(Label::Ironia),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Multiclass => "multiclass",
            Mode::Binary => "binary",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multiclass" | "multi-class" | "multi" => Ok(Mode::Multiclass),
            "binary" => Ok(Mode::Binary),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

/// Sentiment / irony tag.
///
/// `Ironia` is shared by both modes; `NoIronia` only exists in binary mode and
/// the remaining three only in multiclass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Ironia,
    Negativo,
    Neutro,
    Positivo,
    NoIronia,
}

impl Label {
    pub const MULTICLASS: [Label; 4] = [Label::Ironia, Label::Negativo, Label::Neutro, Label::Positivo];

    /// Canonical accented uppercase spelling used in storage.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ironia => "IRONÍA",
            Label::Negativo => "NEGATIVO",
            Label::Neutro => "NEUTRO",
            Label::Positivo => "POSITIVO",
            Label::NoIronia => "NO_IRONÍA",
        }
    }

    /// English row label used in result tables.
    pub fn report_name(self) -> &'static str {
        match self {
            Label::Ironia => "IRONY",
            Label::Negativo => "NEGATIVE",
            Label::Neutro => "NEUTRAL",
            Label::Positivo => "POSITIVE",
            Label::NoIronia => "NOT IRONY",
        }
    }

    pub fn belongs_to(self, mode: Mode) -> bool {
        match mode {
            Mode::Multiclass => self != Label::NoIronia,
            Mode::Binary => matches!(self, Label::Ironia | Label::NoIronia),
        }
    }

    /// Fixed `category_encoded` map: alphabetical in multiclass mode
    /// (IRONÍA=0, NEGATIVO=1, NEUTRO=2, POSITIVO=3), and NO_IRONÍA=0, IRONÍA=1
    /// in binary mode.
    pub fn encode(self, mode: Mode) -> Option<u8> {
        match (mode, self) {
            (Mode::Multiclass, Label::Ironia) => Some(0),
            (Mode::Multiclass, Label::Negativo) => Some(1),
            (Mode::Multiclass, Label::Neutro) => Some(2),
            (Mode::Multiclass, Label::Positivo) => Some(3),
            (Mode::Binary, Label::NoIronia) => Some(0),
            (Mode::Binary, Label::Ironia) => Some(1),
            _ => None,
        }
    }

    /// The binary label this multiclass label merges into.
    pub fn to_binary(self) -> Label {
        match self {
            Label::Ironia => Label::Ironia,
            _ => Label::NoIronia,
        }
    }

    /// Lenient parse: case-insensitive, accents optional, Spanish or English,
    /// spaces/underscores/hyphens interchangeable.
    pub fn parse_lenient(s: &str) -> Option<Label> {
        let key: String = s
            .trim()
            .chars()
            .map(fold_accent)
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect::<String>()
            .to_uppercase();
        match key.as_str() {
            "IRONIA" | "IRONY" => Some(Label::Ironia),
            "NEGATIVO" | "NEGATIVE" => Some(Label::Negativo),
            "NEUTRO" | "NEUTRAL" => Some(Label::Neutro),
            "POSITIVO" | "POSITIVE" => Some(Label::Positivo),
            "NO_IRONIA" | "NOT_IRONY" | "NO_IRONY" | "NOT_IRONIA" => Some(Label::NoIronia),
            _ => None,
        }
    }
}

fn fold_accent(c: char) -> char {
    match c {
        'á' | 'à' | 'ä' | 'â' => 'a',
        'Á' | 'À' | 'Ä' | 'Â' => 'A',
        'é' | 'è' | 'ë' | 'ê' => 'e',
        'É' | 'È' | 'Ë' | 'Ê' => 'E',
        'í' | 'ì' | 'ï' | 'î' => 'i',
        'Í' | 'Ì' | 'Ï' | 'Î' => 'I',
        'ó' | 'ò' | 'ö' | 'ô' => 'o',
        'Ó' | 'Ò' | 'Ö' | 'Ô' => 'O',
        'ú' | 'ù' | 'ü' | 'û' => 'u',
        'Ú' | 'Ù' | 'Ü' | 'Û' => 'U',
        other => other,
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::parse_lenient(s).ok_or_else(|| s.to_string())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Label::parse_lenient(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown label '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenient_parsing_normalizes_variants() {
        for s in ["IRONÍA", "ironia", "Irony", " IRONIA "] {
            assert_eq!(Label::parse_lenient(s), Some(Label::Ironia), "{s}");
        }
        assert_eq!(Label::parse_lenient("NO IRONÍA"), Some(Label::NoIronia));
        assert_eq!(Label::parse_lenient("NOT IRONY"), Some(Label::NoIronia));
        assert_eq!(Label::parse_lenient("neutral"), Some(Label::Neutro));
        assert_eq!(Label::parse_lenient("sarcasmo"), None);
        assert_eq!(Label::parse_lenient(""), None);
    }

    #[test]
    fn encoding_map() {
        assert_eq!(Label::Ironia.encode(Mode::Multiclass), Some(0));
        assert_eq!(Label::Negativo.encode(Mode::Multiclass), Some(1));
        assert_eq!(Label::Neutro.encode(Mode::Multiclass), Some(2));
        assert_eq!(Label::Positivo.encode(Mode::Multiclass), Some(3));
        assert_eq!(Label::NoIronia.encode(Mode::Binary), Some(0));
        assert_eq!(Label::Ironia.encode(Mode::Binary), Some(1));
        assert_eq!(Label::Positivo.encode(Mode::Binary), None);
        for mode in [Mode::Multiclass, Mode::Binary] {
            for &l in mode.labels() {
                let idx = l.encode(mode).unwrap() as usize;
                assert_eq!(mode.label_for_index(idx), Some(l));
            }
        }
    }

    #[test]
    fn serde_uses_canonical_spelling() {
        let json = serde_json::to_string(&Label::NoIronia).unwrap();
        assert_eq!(json, "\"NO_IRONÍA\"");
        let back: Label = serde_json::from_str("\"no ironia\"").unwrap();
        assert_eq!(back, Label::NoIronia);
    }
}
