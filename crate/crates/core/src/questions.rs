//! Templated spatial questions and the ground-truth oracle.
//!
//! Every question instantiates one template,
//! `There is a {anchor} ball; are there any {target} balls {relation} of it?`,
//! over an ordered palette of colors and the four planar relations. The
//! catalog enumerates all instantiations in lexicographic
//! `(anchor, target, relation)` order and is the output space of the
//! relevance classifier.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{config_err, Error, Result};
use crate::world::WorldState;

pub const DEFAULT_PALETTE: [&str; 5] = ["red", "blue", "green", "cyan", "purple"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Left = 0,
    Right = 1,
    Front = 2,
    Behind = 3,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::Left,
        Relation::Right,
        Relation::Front,
        Relation::Behind,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn word(self) -> &'static str {
        match self {
            Relation::Left => "left",
            Relation::Right => "right",
            Relation::Front => "front",
            Relation::Behind => "behind",
        }
    }

    pub fn from_word(word: &str) -> Option<Relation> {
        Relation::ALL.into_iter().find(|r| r.word() == word)
    }

    /// Strict comparison of `target` against `anchor`; ties are never true.
    #[inline]
    pub fn holds(self, anchor: [f64; 2], target: [f64; 2]) -> bool {
        match self {
            Relation::Left => target[0] < anchor[0],
            Relation::Right => target[0] > anchor[0],
            Relation::Front => target[1] < anchor[1],
            Relation::Behind => target[1] > anchor[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Question {
    pub anchor: usize,
    pub target: usize,
    pub relation: Relation,
}

impl Question {
    pub fn new(anchor: usize, target: usize, relation: Relation) -> Self {
        Self {
            anchor,
            target,
            relation,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuestionCatalog {
    colors: Vec<String>,
    relations: Vec<Relation>,
    questions: Vec<Question>,
    lookup: BTreeMap<Question, usize>,
}

impl QuestionCatalog {
    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn get(&self, index: usize) -> Option<&Question> {
        self.questions.get(index)
    }

    pub fn colors(&self) -> &[String] {
        &self.colors
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn num_colors(&self) -> usize {
        self.colors.len()
    }

    pub fn index_of(&self, q: &Question) -> Option<usize> {
        self.lookup.get(q).copied()
    }

    pub fn color_id(&self, name: &str) -> Option<usize> {
        self.colors.iter().position(|c| c == name)
    }

    /// Width of [`QuestionCatalog::encode`]: anchor one-hot, target one-hot,
    /// relation one-hot.
    pub fn encoding_width(&self) -> usize {
        2 * self.colors.len() + self.relations.len()
    }

    pub fn encode(&self, q: &Question, out: &mut [f64]) {
        let c = self.colors.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        out[q.anchor] = 1.0;
        out[c + q.target] = 1.0;
        let r = self
            .relations
            .iter()
            .position(|&r| r == q.relation)
            .expect("relation outside catalog");
        out[2 * c + r] = 1.0;
    }

    pub fn render(&self, q: &Question) -> String {
        format!(
            "There is a {} ball; are there any {} balls {} of it?",
            self.colors[q.anchor],
            self.colors[q.target],
            q.relation.word()
        )
    }

    pub fn parse(&self, text: &str) -> Result<Question> {
        parse_text(text, self)
    }
}

pub fn build_catalog<S: AsRef<str>>(colors: &[S], relations: &[Relation]) -> Result<QuestionCatalog> {
    if colors.len() < 2 {
        return Err(config_err("catalog needs at least 2 colors"));
    }
    if relations.is_empty() {
        return Err(config_err("catalog needs at least 1 relation"));
    }
    let names: Vec<String> = colors.iter().map(|c| c.as_ref().to_string()).collect();
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(config_err(format!("invalid color name {name:?}")));
        }
        if names[..i].contains(name) {
            return Err(config_err(format!("duplicate color name {name:?}")));
        }
    }
    for (i, r) in relations.iter().enumerate() {
        if relations[..i].contains(r) {
            return Err(config_err(format!("duplicate relation {}", r.word())));
        }
    }
    let mut rels = relations.to_vec();
    rels.sort();

    let c = names.len();
    let mut questions = Vec::with_capacity(c * (c - 1) * rels.len());
    for anchor in 0..c {
        for target in (0..c).filter(|&t| t != anchor) {
            for &relation in &rels {
                questions.push(Question::new(anchor, target, relation));
            }
        }
    }
    let lookup = questions.iter().enumerate().map(|(i, q)| (*q, i)).collect();
    Ok(QuestionCatalog {
        colors: names,
        relations: rels,
        questions,
        lookup,
    })
}

/// Five colors, four relations: 80 questions.
pub fn default_catalog() -> QuestionCatalog {
    build_catalog(&DEFAULT_PALETTE, &Relation::ALL).expect("default palette is valid")
}

/// The oracle: does some object of the target color stand in `q.relation`
/// to the (first) object of the anchor color?
pub fn answer(state: &WorldState, q: &Question) -> Result<bool> {
    let anchor = state
        .position_of(q.anchor)
        .ok_or(Error::MissingObject { color: q.anchor })?;
    let mut saw_target = false;
    for (o, &c) in state.color_ids.iter().enumerate() {
        if c == q.target {
            saw_target = true;
            if q.relation.holds(anchor, state.positions[o]) {
                return Ok(true);
            }
        }
    }
    if saw_target {
        Ok(false)
    } else {
        Err(Error::MissingObject { color: q.target })
    }
}

pub fn answer_all(state: &WorldState, catalog: &QuestionCatalog) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(catalog.len());
    for q in catalog.questions() {
        out.push(answer(state, q)?);
    }
    Ok(out)
}

pub fn render_text(q: &Question, catalog: &QuestionCatalog) -> String {
    catalog.render(q)
}

enum Slot {
    Word(&'static str),
    Anchor,
    Target,
    Relation,
}

const TEMPLATE: [Slot; 13] = [
    Slot::Word("There"),
    Slot::Word("is"),
    Slot::Word("a"),
    Slot::Anchor,
    Slot::Word("ball;"),
    Slot::Word("are"),
    Slot::Word("there"),
    Slot::Word("any"),
    Slot::Target,
    Slot::Word("balls"),
    Slot::Relation,
    Slot::Word("of"),
    Slot::Word("it?"),
];

/// Inverse of [`render_text`]. Tokens are separated by single spaces; the
/// error names the first token that departs from the template.
pub fn parse_text(text: &str, catalog: &QuestionCatalog) -> Result<Question> {
    let mut tokens = text.split(' ');
    let mut anchor = None;
    let mut target = None;
    let mut relation = None;
    let err = |i: usize, found: &str, expected: String| Error::Parse {
        token_index: i,
        found: found.to_string(),
        expected,
    };
    for (i, slot) in TEMPLATE.iter().enumerate() {
        let tok = tokens.next().unwrap_or("");
        match slot {
            Slot::Word(w) => {
                if tok != *w {
                    return Err(err(i, tok, format!("{w:?}")));
                }
            }
            Slot::Anchor | Slot::Target => {
                let id = catalog
                    .color_id(tok)
                    .ok_or_else(|| err(i, tok, "a color name".to_string()))?;
                if matches!(slot, Slot::Anchor) {
                    anchor = Some(id);
                } else {
                    target = Some(id);
                }
            }
            Slot::Relation => {
                let r = Relation::from_word(tok)
                    .filter(|r| catalog.relations().contains(r))
                    .ok_or_else(|| err(i, tok, "a relation word".to_string()))?;
                relation = Some(r);
            }
        }
    }
    if let Some(extra) = tokens.next() {
        return Err(err(TEMPLATE.len(), extra, "end of text".to_string()));
    }
    let q = Question::new(anchor.unwrap(), target.unwrap(), relation.unwrap());
    if catalog.index_of(&q).is_none() {
        return Err(err(8, &catalog.colors()[q.target], "a color different from the anchor".to_string()));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn scene(points: &[[f64; 2]]) -> WorldState {
        WorldState {
            positions: points.to_vec(),
            color_ids: (0..points.len()).collect(),
            step_count: 0,
        }
    }

    const RED: usize = 0;
    const BLUE: usize = 1;
    const GREEN: usize = 2;
    const CYAN: usize = 3;

    #[test]
    fn catalog_sizes_and_order() {
        let cat = default_catalog();
        assert_eq!(cat.len(), 80);
        assert_eq!(cat.questions()[0], Question::new(RED, BLUE, Relation::Left));
        assert_eq!(cat.questions()[1], Question::new(RED, BLUE, Relation::Right));
        assert_eq!(cat.questions()[4], Question::new(RED, GREEN, Relation::Left));
        assert_eq!(cat.questions()[16], Question::new(BLUE, RED, Relation::Left));
        let two = build_catalog(&["red", "blue"], &Relation::ALL).unwrap();
        assert_eq!(two.len(), 8);
        for (i, q) in cat.questions().iter().enumerate() {
            assert_eq!(cat.index_of(q), Some(i));
            assert_ne!(q.anchor, q.target);
        }
    }

    #[test]
    fn catalog_rejects_bad_palettes() {
        assert!(build_catalog(&["red", "red"], &Relation::ALL).is_err());
        assert!(build_catalog(&["red"], &Relation::ALL).is_err());
        assert!(build_catalog(&["red", "blue"], &[]).is_err());
        assert!(build_catalog(&["red", "dark blue"], &Relation::ALL).is_err());
    }

    #[test]
    fn answer_examples() {
        let mut pts = [[0.0, 0.0]; 5];
        pts[RED] = [-0.5, 0.0];
        pts[CYAN] = [0.5, 0.3];
        let s = scene(&pts);
        assert!(!answer(&s, &Question::new(RED, CYAN, Relation::Left)).unwrap());
        assert!(answer(&s, &Question::new(RED, CYAN, Relation::Right)).unwrap());
        assert!(answer(&s, &Question::new(CYAN, RED, Relation::Front)).unwrap());
    }

    #[test]
    fn ties_answer_no() {
        let s = scene(&[[0.25, -0.1], [0.25, 0.7]]);
        assert!(!answer(&s, &Question::new(RED, BLUE, Relation::Left)).unwrap());
        assert!(!answer(&s, &Question::new(RED, BLUE, Relation::Right)).unwrap());
    }

    #[test]
    fn missing_color_is_an_error() {
        let s = scene(&[[0.0, 0.0], [1.0, 1.0]]);
        assert_eq!(
            answer(&s, &Question::new(RED, CYAN, Relation::Left)),
            Err(Error::MissingObject { color: CYAN })
        );
        assert_eq!(
            answer(&s, &Question::new(CYAN, RED, Relation::Left)),
            Err(Error::MissingObject { color: CYAN })
        );
    }

    #[test]
    fn answer_all_two_colors() {
        // red (0,0), blue (1,1): blue is right of and behind red; red is
        // left of and in front of blue. Four of eight hold.
        let cat = build_catalog(&["red", "blue"], &Relation::ALL).unwrap();
        let s = scene(&[[0.0, 0.0], [1.0, 1.0]]);
        let ans = answer_all(&s, &cat).unwrap();
        assert_eq!(ans, vec![false, true, false, true, true, false, true, false]);
        assert_eq!(ans.iter().filter(|&&a| a).count(), 4);
    }

    #[test]
    fn stacked_scene_answers_all_no() {
        let cat = default_catalog();
        let s = scene(&[[0.3, 0.3]; 5]);
        assert!(answer_all(&s, &cat).unwrap().iter().all(|&a| !a));
    }

    #[test]
    fn render_examples() {
        let cat = default_catalog();
        assert_eq!(
            cat.render(&Question::new(RED, CYAN, Relation::Left)),
            "There is a red ball; are there any cyan balls left of it?"
        );
        assert_eq!(
            render_text(&Question::new(BLUE, GREEN, Relation::Left), &cat),
            "There is a blue ball; are there any green balls left of it?"
        );
    }

    #[test]
    fn parse_round_trips_whole_catalog() {
        let cat = default_catalog();
        for q in cat.questions() {
            assert_eq!(parse_text(&cat.render(q), &cat).unwrap(), *q);
        }
    }

    #[test]
    fn parse_errors_name_the_token() {
        let cat = default_catalog();
        match parse_text("hello", &cat) {
            Err(Error::Parse {
                token_index, found, ..
            }) => {
                assert_eq!(token_index, 0);
                assert_eq!(found, "hello");
            }
            other => panic!("{other:?}"),
        }
        match parse_text("There is a teal ball; are there any cyan balls left of it?", &cat) {
            Err(Error::Parse {
                token_index, found, ..
            }) => {
                assert_eq!(token_index, 3);
                assert_eq!(found, "teal");
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_text("There is a red ball; are there any red balls left of it?", &cat).is_err());
        assert!(parse_text("There is a red ball; are there any cyan balls above of it?", &cat).is_err());
        assert!(parse_text("There is a red ball; are there any cyan balls left of it? ", &cat).is_err());
        assert!(parse_text("There is a red ball; are there any cyan balls left of", &cat).is_err());
    }

    #[test]
    fn encoding_marks_three_slots() {
        let cat = default_catalog();
        assert_eq!(cat.encoding_width(), 14);
        let mut buf = [0.0; 14];
        cat.encode(&Question::new(BLUE, CYAN, Relation::Behind), &mut buf);
        assert_eq!(buf[1], 1.0);
        assert_eq!(buf[5 + 3], 1.0);
        assert_eq!(buf[10 + 3], 1.0);
        assert_eq!(buf.iter().sum::<f64>(), 3.0);
    }

    fn arb_scene() -> impl Strategy<Value = WorldState> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5).prop_map(|pts| {
            scene(&pts.into_iter().map(|(x, y)| [x, y]).collect::<Vec<_>>())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn mirror_symmetry_and_exclusivity(s in arb_scene(), a in 0usize..5, t in 0usize..5) {
            prop_assume!(a != t);
            let (pa, pt) = (s.positions[a], s.positions[t]);
            prop_assume!(pa[0] != pt[0] && pa[1] != pt[1]);
            let ask = |a, t, r| answer(&s, &Question::new(a, t, r)).unwrap();
            prop_assert_eq!(ask(a, t, Relation::Left), ask(t, a, Relation::Right));
            prop_assert_eq!(ask(a, t, Relation::Front), ask(t, a, Relation::Behind));
            prop_assert!(!(ask(a, t, Relation::Left) && ask(a, t, Relation::Right)));
            prop_assert!(!(ask(a, t, Relation::Front) && ask(a, t, Relation::Behind)));
        }

        #[test]
        fn answer_all_matches_pointwise(s in arb_scene(), i in 0usize..80) {
            let cat = default_catalog();
            let all = answer_all(&s, &cat).unwrap();
            prop_assert_eq!(all[i], answer(&s, &cat.questions()[i]).unwrap());
        }
    }
}
