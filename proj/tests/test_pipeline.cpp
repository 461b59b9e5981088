#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "graphmerge/binary_io.hpp"
#include "graphmerge/graph.hpp"
#include "graphmerge/pipeline.hpp"
#include "test_util.hpp"

using namespace graphmerge;
using namespace graphmerge::pipeline;

namespace {

struct Workspace {
  testutil::TempDir dir;
  std::vector<CorpusSpec> corpora;

  Workspace() {
    ToyOptions t;
    t.out_dir = dir / "data";
    t.concepts = 30;
    t.high_pairs = 120;
    t.low_pairs = 20;
    t.dev_pairs = 10;
    std::ostringstream log;
    cmd_make_toy(t, log);
    corpora = {CorpusSpec::parse("en-l1=" + (dir / "data/train.en-l1.tsv").string()),
               CorpusSpec::parse("en-l2=" + (dir / "data/train.en-l2.tsv").string())};
  }
};

std::string run_log(auto&& f) {
  std::ostringstream log;
  f(log);
  return log.str();
}

}  // namespace

TEST_CASE("corpus spec parsing") {
  auto s = CorpusSpec::parse("en-de=/x/y.tsv");
  CHECK(s.src == "en");
  CHECK(s.tgt == "de");
  CHECK(s.path == "/x/y.tsv");
  CHECK(s.name() == "en-de");
  for (const char* bad : {"en=x", "-de=x", "en-=x", "en-de=", "ende"}) CHECK_THROWS_AS(CorpusSpec::parse(bad), ValidationError);
}

TEST_CASE("provenance line") {
  auto p = provenance("graph", "abc", 7);
  CHECK(p.starts_with("graphmerge graph version="));
  CHECK(p.ends_with(" seed=7"));
  CHECK(p.find("config=") != std::string::npos);
  CHECK(provenance("graph", "abc", 7) == p);
  CHECK(provenance("graph", "abd", 7) != p);
}

TEST_CASE("align, graph and their artifacts") {
  Workspace w;
  AlignOptions a;
  a.corpora = w.corpora;
  a.out_dir = w.dir / "align";
  a.strategy = SymmetrizeStrategy::kGrowDiagFinalAnd;
  run_log([&](std::ostream& l) { cmd_align(a, l); });
  for (const char* ext : {"fwd", "bwd", "sym"}) CHECK(std::filesystem::exists(w.dir / ("align/en-l1." + std::string(ext))));
  const auto sym = read_file(w.dir / "align/en-l2.sym");
  CHECK(sym.starts_with("# graphmerge align version="));
  CHECK(sym.find("# strategy=gdfa\n") != std::string::npos);

  GraphOptions g;
  g.corpora = w.corpora;
  g.alignment_dir = w.dir / "align";
  g.out_dir = w.dir / "g1";
  g.export_tsv = true;
  const auto log = run_log([&](std::ostream& l) { cmd_graph(g, l); });
  CHECK(log.find("non-en x non-en block mass: 0 (empty)") != std::string::npos);
  CHECK(std::filesystem::exists(w.dir / "g1/graph.tsv"));
  std::string prov;
  auto graph = load_graph(w.dir / "g1/graph.bin", &prov);
  CHECK(prov.starts_with("graphmerge graph "));
  CHECK(graph.size() == Vocabulary::load(w.dir / "g1/vocab.txt").size());

  g.out_dir = w.dir / "g2";
  run_log([&](std::ostream& l) { cmd_graph(g, l); });
  CHECK(read_file(w.dir / "g1/graph.bin") == read_file(w.dir / "g2/graph.bin"));
  CHECK(read_file(w.dir / "g1/vocab.txt") == read_file(w.dir / "g2/vocab.txt"));
}

TEST_CASE("import mode validates before writing") {
  Workspace w;
  AlignOptions a;
  a.corpora = {w.corpora[1]};
  a.out_dir = w.dir / "imp";
  const auto n = load_bitext(w.corpora[1].path, "en", "l2").size();
  std::string good_fwd, good_bwd, short_fwd;
  for (std::size_t i = 0; i < n; ++i) {
    good_fwd += "0-0\n";
    good_bwd += "0-0\n";
    if (i + 1 < n) short_fwd += "0-0\n";
  }
  testutil::write_text(w.dir / "f.txt", short_fwd);
  testutil::write_text(w.dir / "b.txt", good_bwd);
  a.import_forward = {w.dir / "f.txt"};
  a.import_backward = {w.dir / "b.txt"};
  CHECK_THROWS_AS(run_log([&](std::ostream& l) { cmd_align(a, l); }), ValidationError);
  CHECK(!std::filesystem::exists(a.out_dir));

  testutil::write_text(w.dir / "f.txt", "0-99\n" + good_fwd.substr(4));
  CHECK_THROWS_AS(run_log([&](std::ostream& l) { cmd_align(a, l); }), ValidationError);
  CHECK(!std::filesystem::exists(a.out_dir));

  testutil::write_text(w.dir / "f.txt", good_fwd);
  run_log([&](std::ostream& l) { cmd_align(a, l); });
  CHECK(read_pharaoh_file(a.out_dir / "en-l2.sym").size() == n);
  CHECK(read_file(a.out_dir / "en-l2.sym").find("strategy=gdfa") != std::string::npos);
}

TEST_CASE("empty alignments give a self-loop graph with a warning") {
  Workspace w;
  std::filesystem::create_directories(w.dir / "empty");
  for (const auto& c : w.corpora) {
    const auto n = load_bitext(c.path, c.src, c.tgt).size();
    write_pharaoh_file(w.dir / "empty" / (c.name() + ".sym"), std::vector<SentenceAlignment>(n), {});
  }
  GraphOptions g;
  g.corpora = w.corpora;
  g.alignment_dir = w.dir / "empty";
  g.out_dir = w.dir / "g";
  const auto log = run_log([&](std::ostream& l) { cmd_graph(g, l); });
  CHECK(log.find("warning") != std::string::npos);
  auto graph = load_graph(w.dir / "g/graph.bin");
  CHECK(graph.edge_count() == 0);
}

TEST_CASE("train and analyze through the pipeline") {
  Workspace w;
  AlignOptions a;
  a.corpora = w.corpora;
  a.out_dir = w.dir / "align";
  a.strategy = SymmetrizeStrategy::kIntersect;
  GraphOptions g;
  g.corpora = w.corpora;
  g.alignment_dir = a.out_dir;
  g.out_dir = w.dir / "graph";
  run_log([&](std::ostream& l) {
    cmd_align(a, l);
    cmd_graph(g, l);
  });

  TrainOptions t;
  t.train = w.corpora;
  t.dev = {CorpusSpec::parse("en-l2=" + (w.dir / "data/dev.en-l2.tsv").string())};
  t.vocab = w.dir / "graph/vocab.txt";
  t.graph = w.dir / "graph/graph.bin";
  t.out_dir = w.dir / "ckpt";
  t.model.d_model = 16;
  t.model.ffn_dim = 32;
  t.model.hops = 1;
  t.model.max_steps = 12;
  t.model.checkpoint_interval = 6;
  const auto log = run_log([&](std::ostream& l) { cmd_train(t, l); });
  CHECK(log.find("in the graph stack") != std::string::npos);
  CHECK(read_file(w.dir / "ckpt/train_log.csv").starts_with("# graphmerge train version="));

  TrainOptions missing = t;
  missing.graph.clear();
  CHECK_THROWS_AS(run_log([&](std::ostream& l) { cmd_train(missing, l); }), ValidationError);

  AnalyzeOptions an;
  an.checkpoint = w.dir / "ckpt";
  an.dictionaries = {CorpusSpec::parse("en-l1=" + (w.dir / "data/dict.en-l1.tsv").string()),
                     CorpusSpec::parse("en-l2=" + (w.dir / "data/dict.en-l2.tsv").string())};
  an.test = t.dev;
  an.out_dir = w.dir / "report";
  run_log([&](std::ostream& l) { cmd_analyze(an, l); });
  const auto sim = read_file(w.dir / "report/similarity.csv");
  CHECK(sim.find("l1-l2,original,") != std::string::npos);
  CHECK(sim.find("l1-l2,reparam,") != std::string::npos);
  CHECK(read_file(w.dir / "report/bleu.csv").find("\nen-l2,") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  testutil::TempDir dir;
  const std::string cli = GRAPHMERGE_CLI;
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(run("--help") == 0);
  CHECK(run("") == 1);
  CHECK(run("align --no-such-flag") == 1);
  CHECK(run("align --corpus en-de=/nonexistent.tsv --out " + (dir / "a").string()) == 1);
  CHECK(run("train --train en-de=x --dev en-de=x --out y --preset nope") == 1);
  CHECK(run("make-toy --out " + (dir / "toy").string() + " --concepts 10 --high-pairs 20 --low-pairs 5 --dev-pairs 3") == 0);
  const auto toy = (dir / "toy").string();
  CHECK(run("align --corpus en-l1=" + toy + "/train.en-l1.tsv --out " + toy + "/al") == 0);
  testutil::write_text(dir / "blocker", "x");
  CHECK(run("align --corpus en-l1=" + toy + "/train.en-l1.tsv --out " + (dir / "blocker").string() + "/sub") == 2);
}
