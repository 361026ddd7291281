//! Vocabulary for synthetic records.

use rand::Rng;

/// (ISO code, a spelling the default gazetteer resolves), mixing EU and non-EU early on.
pub const COUNTRY_POOL: [(&str, &str); 40] = [
    ("US", "united states"),
    ("CN", "china"),
    ("DE", "germany"),
    ("GB", "united kingdom"),
    ("JP", "japan"),
    ("FR", "france"),
    ("CA", "canada"),
    ("IT", "italy"),
    ("KR", "south korea"),
    ("ES", "spain"),
    ("AU", "australia"),
    ("NL", "netherlands"),
    ("IN", "india"),
    ("SE", "sweden"),
    ("BR", "brazil"),
    ("CH", "switzerland"),
    ("PL", "poland"),
    ("KE", "kenya"),
    ("BE", "belgium"),
    ("ZA", "south africa"),
    ("AT", "austria"),
    ("MX", "mexico"),
    ("DK", "denmark"),
    ("NO", "norway"),
    ("FI", "finland"),
    ("IL", "israel"),
    ("PT", "portugal"),
    ("AR", "argentina"),
    ("IE", "ireland"),
    ("SG", "singapore"),
    ("GR", "greece"),
    ("NZ", "new zealand"),
    ("CZ", "czechia"),
    ("CL", "chile"),
    ("HU", "hungary"),
    ("TH", "thailand"),
    ("NG", "nigeria"),
    ("EG", "egypt"),
    ("TR", "turkey"),
    ("RU", "russia"),
];

/// EU-28.
pub const EU_MEMBERS: [&str; 28] = [
    "AT", "BE", "BG", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GB", "GR", "HR", "HU", "IE", "IT", "LT",
    "LU", "LV", "MT", "NL", "PL", "PT", "RO", "SE", "SI", "SK",
];

pub const DISCIPLINES: [&str; 8] = [
    "Biology",
    "Biomedical Research",
    "Chemistry",
    "Clinical Medicine",
    "Earth and Space",
    "Engineering and Technology",
    "Mathematics",
    "Physics",
];

pub const EXCLUDED_DISCIPLINES: [&str; 6] = [
    "Arts",
    "Health",
    "Humanities",
    "Professional Fields",
    "Psychology",
    "Social Sciences",
];

pub const DOC_TYPES: [&str; 3] = ["Article", "Review", "Note"];

pub const REJECTED_DOC_TYPES: [&str; 3] = ["Editorial Material", "Letter", "Meeting Abstract"];

const SYLLABLES: [&str; 16] = [
    "zor", "vak", "trel", "quin", "bix", "dru", "skel", "mon", "frap", "glo", "wix", "pem", "yul", "hask", "oth",
    "rinz",
];

/// Pronounceable word with no country reading, distinct for every `index < 4096`.
pub fn word(index: usize) -> String {
    let mut out = String::new();
    let mut i = index;
    for _ in 0..3 {
        out.push_str(SYLLABLES[i % SYLLABLES.len()]);
        i /= SYLLABLES.len();
    }
    out
}

/// Hands out fresh words so that every generated name is unique.
#[derive(Debug, Default)]
pub(crate) struct WordSource {
    next: usize,
}

impl WordSource {
    pub(crate) fn fresh(&mut self) -> String {
        let w = word(self.next);
        self.next += 1;
        w
    }
}

pub(crate) fn country_token_name(template: usize, country: &str, w: &str) -> String {
    match template % 4 {
        0 => format!("{country} science foundation {w} programme"),
        1 => format!("national research council of {country} {w} grant"),
        2 => format!("{country} academy of sciences {w} fund"),
        _ => format!("ministry of science of {country} {w} initiative"),
    }
}

pub(crate) fn eu_name(template: usize, w: &str) -> String {
    match template % 3 {
        0 => format!("european research council {w} programme"),
        1 => format!("european commission {w} framework"),
        _ => format!("european union {w} fund"),
    }
}

pub(crate) fn multi_name(template: usize, a: &str, b: &str, w: &str) -> String {
    match template % 2 {
        0 => format!("{a}-{b} binational science foundation {w}"),
        _ => format!("{a} {b} joint {w} fund"),
    }
}

pub(crate) fn opaque_name(template: usize, w: &str) -> String {
    const KINDS: [&str; 6] = ["foundation", "trust", "endowment", "research agency", "institute", "fund"];
    format!("{w} {}", KINDS[template % KINDS.len()])
}

/// Rewrites a canonical name so that only normalization recovers it.
pub(crate) fn messy<R: Rng>(name: &str, rng: &mut R) -> String {
    match rng.gen_range(0..5) {
        0 => name.to_uppercase(),
        1 => name
            .split(' ')
            .map(|w| {
                let mut chars = w.chars();
                match chars.next() {
                    Some(first) => first.to_uppercase().chain(chars).collect(),
                    None => String::new(),
                }
            })
            .collect::<Vec<_>>()
            .join(" "),
        2 => format!("  {}\t", name.replace(' ', "  ")),
        3 => format!("{name}."),
        _ => format!("\"{name}\","),
    }
}
