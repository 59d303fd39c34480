// Microbenchmarks for the hot paths: the recurrent forward/backward pass,
// CRF lattice inference, and tokenization.
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "ate/corpus.hpp"
#include "ate/crf.hpp"
#include "ate/lstm.hpp"
#include "ate/neural.hpp"
#include "ate/rng.hpp"
#include "ate/tagger.hpp"
#include "ate/types.hpp"
#include "synthetic.hpp"

namespace {

std::vector<ate::Vec> random_inputs(int n, int dim, std::uint64_t seed) {
  ate::Rng rng(seed);
  std::vector<ate::Vec> xs;
  for (int i = 0; i < n; ++i) {
    ate::Vec x(dim);
    for (int d = 0; d < dim; ++d) {
      x[d] = rng.normal();
    }
    xs.push_back(std::move(x));
  }
  return xs;
}

void bench_lstm_forward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  ate::ParamStore store;
  ate::Rng rng(1);
  const ate::LstmParams lstm = ate::LstmParams::create(store, "lstm", 100, hidden, rng);
  const std::vector<ate::Vec> xs = random_inputs(30, 100, 2);
  for (auto _ : state) {
    ate::Tape tape;
    std::vector<ate::Tape::Var> inputs;
    for (const ate::Vec& x : xs) {
      inputs.push_back(tape.input(x));
    }
    const auto hs = ate::run_lstm(tape, inputs, lstm, ate::Direction::Forward);
    benchmark::DoNotOptimize(tape.value(hs.back())[0]);
  }
  state.SetItemsProcessed(state.iterations() * 30);
}

void bench_lstm_forward_backward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  ate::ParamStore store;
  ate::Rng rng(1);
  const ate::LstmParams lstm = ate::LstmParams::create(store, "lstm", 100, hidden, rng);
  ate::Param& readout = store.create("readout", 1, hidden);
  ate::glorot_uniform(readout.value, rng);
  const std::vector<ate::Vec> xs = random_inputs(30, 100, 2);
  for (auto _ : state) {
    store.zero_grads();
    ate::Tape tape;
    std::vector<ate::Tape::Var> inputs;
    for (const ate::Vec& x : xs) {
      inputs.push_back(tape.input(x));
    }
    const auto hs = ate::run_lstm(tape, inputs, lstm, ate::Direction::Forward);
    tape.backward(tape.affine(tape.sum(hs), readout, nullptr));
    benchmark::DoNotOptimize(store.all().front()->grad.sum());
  }
  state.SetItemsProcessed(state.iterations() * 30);
}

ate::LatticeScores random_lattice(int n, std::uint64_t seed) {
  ate::Rng rng(seed);
  ate::LatticeScores lat;
  lat.emissions = ate::Mat(n, ate::kNumTags);
  lat.transitions = ate::Mat(ate::kNumTags, ate::kNumTags);
  lat.start = ate::Vec(ate::kNumTags);
  lat.end = ate::Vec(ate::kNumTags);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < ate::kNumTags; ++k) {
      lat.emissions(i, k) = rng.normal();
    }
  }
  for (int a = 0; a < ate::kNumTags; ++a) {
    for (int b = 0; b < ate::kNumTags; ++b) {
      lat.transitions(a, b) = rng.normal();
    }
    lat.start[a] = rng.normal();
    lat.end[a] = rng.normal();
  }
  return lat;
}

void bench_crf_log_partition(benchmark::State& state) {
  const ate::LatticeScores lat = random_lattice(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ate::log_partition(lat));
  }
}

void bench_crf_viterbi(benchmark::State& state) {
  const ate::LatticeScores lat = random_lattice(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ate::viterbi(lat, true));
  }
}

void bench_tokenize(benchmark::State& state) {
  const std::string text =
      "The battery life is great, but the screen-door effect ruins movies; "
      "still, for $499.99 (tax included!) this 15.6\" laptop beats last "
      "year's model... I'd buy it again, wouldn't you?";
  for (auto _ : state) {
    benchmark::DoNotOptimize(ate::tokenize(text));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<long>(text.size()));
}

void bench_sentence_loss(benchmark::State& state) {
  const ate_test::SyntheticCorpus corpus = ate_test::make_synthetic_corpus(20, 1, 5);
  const ate::EmbeddingTable table = ate_test::make_synthetic_table(50, 6);
  ate::TaggerConfig cfg = ate::TaggerConfig::from_method("WoCh-BiLSTM-CRF");
  const ate::Vocabulary vocab = ate::Vocabulary::build(corpus.train);
  const ate::Charset charset = ate::build_charset(corpus.train);
  ate::TaggerModel model = ate::TaggerModel::build(cfg, table, vocab, charset, 7);
  const ate::Sentence& sentence = corpus.train.front();
  ate::Rng rng(8);
  for (auto _ : state) {
    model.params().zero_grads();
    ate::Tape tape;
    tape.backward(model.sentence_loss(tape, sentence, /*train=*/true, rng));
    benchmark::DoNotOptimize(model.params().all().front()->grad.sum());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(sentence.tokens.size()));
}

}  // namespace

BENCHMARK(bench_lstm_forward)->Arg(50)->Arg(100);
BENCHMARK(bench_lstm_forward_backward)->Arg(50)->Arg(100);
BENCHMARK(bench_crf_log_partition)->Arg(10)->Arg(30)->Arg(80);
BENCHMARK(bench_crf_viterbi)->Arg(10)->Arg(30)->Arg(80);
BENCHMARK(bench_tokenize);
BENCHMARK(bench_sentence_loss);

BENCHMARK_MAIN();
