/// Balance heuristic weight of strategy `a` against strategy `b`.
pub fn mis_weight(pdf_a: f64, pdf_b: f64) -> f64 {
    assert!(pdf_a >= 0.0 && pdf_b >= 0.0, "negative pdf ({pdf_a}, {pdf_b})");
    assert!(pdf_a + pdf_b > 0.0, "both strategy pdfs are zero");
    pdf_a / (pdf_a + pdf_b)
}
