#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "ate/corpus.hpp"
#include "ate/embeddings.hpp"
#include "ate/types.hpp"

static const std::string kData = ATE_TEST_DATA_DIR;

TEST_CASE("load_vectors reads plain text, counting skipped lines") {
  const ate::EmbeddingTable t = ate::load_vectors(kData + "/mini_vectors.txt");
  CHECK(t.dim == 4);
  CHECK(t.vectors.size() == 4);  // pizza, screen, battery, life
  // wrong arity + unparseable numbers + duplicate word
  CHECK(t.skipped_lines == 3);
  REQUIRE(t.contains("pizza"));
  // duplicates keep the first occurrence
  CHECK(t.vectors.at("pizza")[0] == doctest::Approx(0.1));
  CHECK(t.vectors.at("battery")[3] == doctest::Approx(-1.5));
}

TEST_CASE("load_vectors transparently reads gzip content") {
  const ate::EmbeddingTable plain = ate::load_vectors(kData + "/mini_vectors.txt");
  const ate::EmbeddingTable gz = ate::load_vectors(kData + "/mini_vectors.txt.gz");
  CHECK(gz.dim == plain.dim);
  CHECK(gz.vectors.size() == plain.vectors.size());
  CHECK(gz.skipped_lines == plain.skipped_lines);
  for (const auto& [word, vec] : plain.vectors) {
    REQUIRE(gz.contains(word));
    CHECK((gz.vectors.at(word) - vec).norm() == 0.0);
  }
}

TEST_CASE("load_vectors honors a fastText-style count/dim header") {
  const ate::EmbeddingTable t = ate::load_vectors(kData + "/mini_vectors_header.txt");
  CHECK(t.dim == 4);
  CHECK(t.vectors.size() == 4);
  CHECK(t.skipped_lines == 0);
}

TEST_CASE("load_vectors enforces an expected dimension") {
  CHECK_NOTHROW(ate::load_vectors(kData + "/mini_vectors.txt", 4));
  CHECK_THROWS_AS(ate::load_vectors(kData + "/mini_vectors.txt", 300), ate::ParseError);
  CHECK_THROWS_AS(ate::load_vectors(kData + "/no_such_file.txt"), ate::ParseError);
}

TEST_CASE("lookup falls back to the case-folded form") {
  const ate::EmbeddingTable t = ate::load_vectors(kData + "/mini_vectors.txt");
  CHECK(ate::lookup(t, "pizza") != nullptr);
  const ate::Vec* folded = ate::lookup(t, "PIZZA");
  REQUIRE(folded != nullptr);
  CHECK((*folded)[0] == doctest::Approx(0.1));
  CHECK(ate::lookup(t, "absent") == nullptr);
}

TEST_CASE("coverage reports per-subset and macro-averaged miss fractions") {
  ate::EmbeddingTable t;
  t.name = "toy";
  t.dim = 1;
  t.vectors["a"] = ate::Vec::Ones(1);
  t.vectors["b"] = ate::Vec::Ones(1);

  const ate::CoverageReport r =
      ate::coverage(t, {{"s1", {"a", "b", "c"}}, {"s2", {"a"}}});
  CHECK(r.embedding == "toy");
  REQUIRE(r.subsets.size() == 2);
  CHECK(r.subsets[0].n_types == 3);
  CHECK(r.subsets[0].n_missing == 1);
  CHECK(r.subsets[0].missing_fraction == doctest::Approx(1.0 / 3.0));
  CHECK(r.subsets[1].missing_fraction == 0.0);
  CHECK(r.average_missing_fraction == doctest::Approx(1.0 / 6.0));

  CHECK_THROWS_AS(ate::coverage(t, {{"empty", {}}}), ate::ContractError);

  std::ostringstream csv;
  ate::write_coverage_csv(csv, {r});
  const std::string text = csv.str();
  CHECK(text.find("embedding,subset,pct_missing") == 0);
  CHECK(text.find("toy,s1,33.3333") != std::string::npos);
  CHECK(text.find("toy,average,16.6667") != std::string::npos);
}

TEST_CASE("word_types folds case and keeps first-seen order") {
  ate::RawSentence a;
  a.text = "The Pizza the PIZZA";
  ate::RawSentence b;
  b.text = "pizza box";
  const std::vector<ate::Sentence> ds = {ate::ingest_sentence(a), ate::ingest_sentence(b)};
  CHECK(ate::word_types(ds) == std::vector<std::string>{"the", "pizza", "box"});
}

TEST_CASE("vocabulary reserves pad/unk and folds case") {
  ate::RawSentence a;
  a.text = "Great Battery battery";
  const ate::Vocabulary v = ate::Vocabulary::build({ate::ingest_sentence(a)});
  CHECK(v.size() == 4);  // pad, unk, great, battery
  CHECK(v.word(ate::Vocabulary::kPad) == ate::Vocabulary::kPadToken);
  CHECK(v.word(ate::Vocabulary::kUnk) == ate::Vocabulary::kUnkToken);
  CHECK(v.lookup("GREAT") == 2);
  CHECK(v.lookup("battery") == 3);
  CHECK(v.lookup("unseen") == ate::Vocabulary::kUnk);

  const ate::Vocabulary back = ate::Vocabulary::from_words(v.words());
  CHECK(back.words() == v.words());
  CHECK(back.lookup("battery") == 3);

  CHECK_THROWS_AS(ate::Vocabulary::from_words({"nope", "<unk>"}), ate::ContractError);
  CHECK_THROWS_AS(ate::Vocabulary::from_words({"<pad>", "<unk>", "x", "x"}),
                  ate::ContractError);
}

TEST_CASE("build_matrix copies hits, zeroes padding and seeds the misses") {
  const ate::EmbeddingTable t = ate::load_vectors(kData + "/mini_vectors.txt");
  ate::RawSentence a;
  a.text = "pizza mystery";
  const ate::Vocabulary v = ate::Vocabulary::build({ate::ingest_sentence(a)});
  REQUIRE(v.size() == 4);

  const ate::Mat m1 = ate::build_matrix(t, v, 7);
  const ate::Mat m2 = ate::build_matrix(t, v, 7);
  const ate::Mat m3 = ate::build_matrix(t, v, 8);
  CHECK(m1.rows() == 4);
  CHECK(m1.cols() == 4);
  CHECK(m1.row(ate::Vocabulary::kPad).norm() == 0.0);
  CHECK((m1.row(2).transpose() - t.vectors.at("pizza")).norm() == 0.0);
  CHECK((m1 - m2).norm() == 0.0);
  CHECK((m1.row(3) - m3.row(3)).norm() != 0.0);  // the OOV row is seed-dependent
  for (int c = 0; c < 4; ++c) {
    CHECK(std::abs(m1(3, c)) <= 0.25);
    CHECK(std::abs(m1(1, c)) <= 0.25);  // unk row is drawn, not zero
  }
}
