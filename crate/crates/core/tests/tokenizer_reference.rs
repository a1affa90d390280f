use proptest::prelude::*;
use serde::Deserialize;
use sva_circuits::model::Tokenizer;

#[derive(Deserialize)]
struct Case {
    text: String,
    ids: Vec<u32>,
}

fn cases() -> Vec<Case> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tokenizer_cases.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn encodes_like_reference_tokenizer() {
    let tok = Tokenizer::gpt2();
    let cases = cases();
    assert!(cases.len() >= 30);
    for c in cases {
        assert_eq!(tok.encode(&c.text).ids(), &c.ids[..], "text {:?}", c.text);
    }
}

#[test]
fn decodes_reference_ids() {
    let tok = Tokenizer::gpt2();
    for c in cases() {
        assert_eq!(tok.decode(&c.ids), c.text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decode_inverts_encode(text in "\\PC{0,40}") {
        let tok = Tokenizer::gpt2();
        prop_assert_eq!(tok.decode(tok.encode(&text).ids()), text);
    }

    #[test]
    fn ascii_round_trip_with_whitespace(text in "[ -~\\t\\n]{0,60}") {
        let tok = Tokenizer::gpt2();
        prop_assert_eq!(tok.decode(tok.encode(&text).ids()), text);
    }
}
