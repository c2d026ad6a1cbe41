//! Binding files shipped with the crate, addressed by name (`task1.scripted`).

pub const BINDINGS: [(&str, &str); 10] = [
    ("task1.scripted", include_str!("../bindings/task1.scripted.json")),
    ("task2.scripted", include_str!("../bindings/task2.scripted.json")),
    ("task3.scripted", include_str!("../bindings/task3.scripted.json")),
    ("task4.scripted", include_str!("../bindings/task4.scripted.json")),
    ("fig2.scripted", include_str!("../bindings/fig2.scripted.json")),
    ("task1.llm", include_str!("../bindings/task1.llm.json")),
    ("task2.llm", include_str!("../bindings/task2.llm.json")),
    ("task3.llm", include_str!("../bindings/task3.llm.json")),
    ("task4.llm", include_str!("../bindings/task4.llm.json")),
    ("fig2.llm", include_str!("../bindings/fig2.llm.json")),
];

pub fn bindings(name: &str) -> Option<&'static str> {
    BINDINGS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
