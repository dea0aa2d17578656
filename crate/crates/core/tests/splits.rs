use triadic::dataset::random_split;

#[test]
fn twenty_percent_of_the_full_corpus() {
    let s = random_split(60_566, 0.2, 0).unwrap();
    assert_eq!(s.test.len(), 12_113);
    assert_eq!(s.train.len(), 60_566 - 12_113);
}
