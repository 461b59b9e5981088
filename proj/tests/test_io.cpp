#include <doctest.h>

#include <set>

#include "graphmerge/binary_io.hpp"
#include "graphmerge/rng.hpp"
#include "graphmerge/tensor_io.hpp"
#include "test_util.hpp"

using namespace graphmerge;

TEST_CASE("fnv1a64 and seed derivation") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(derive_seed(1, "dropout") == derive_seed(1, "dropout"));
  std::set<std::uint64_t> seeds;
  for (const char* c : {"dropout", "batches", "model.init", "model.embedding", "model.graph"})
    for (std::uint64_t b : {1, 2, 3}) seeds.insert(derive_seed(b, c));
  CHECK(seeds.size() == 15);
}

TEST_CASE("rng determinism, ranges and state") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(a.below(7) < 7);
  }
  const auto st = a.state();
  const double next = a.uniform();
  Rng c(0);
  c.restore(st);
  CHECK(c.uniform() == next);
  CHECK_THROWS(a.below(0));
}

TEST_CASE("crc32 matches the standard check value") { CHECK(crc32_of("123456789") == 0xCBF43926u); }

TEST_CASE("byte reader bounds") {
  ByteWriter w;
  w.u32(7);
  w.f64(-2.5);
  w.str("hi");
  ByteReader r(w.buffer(), "test");
  CHECK(r.u32() == 7);
  CHECK(r.f64() == -2.5);
  CHECK(r.str() == "hi");
  CHECK(r.remaining() == 0);
  CHECK_THROWS_AS(r.u32(), ValidationError);
}

TEST_CASE("atomic writes leave no temporaries") {
  testutil::TempDir dir;
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  CHECK(read_file(dir / "f.txt") == "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
  CHECK_THROWS(read_file(dir / "missing"));
}

TEST_CASE("tensor archive round-trip and integrity") {
  TensorArchive ar;
  ar.metadata = "meta";
  Matrix a(2, 3);
  a << 1, 2, 3, 4, 5, 6.5;
  ar.add("a", a);
  ar.add("empty", Matrix(0, 4));
  CHECK_THROWS_AS(ar.add("a", a), ValidationError);
  const auto bytes = ar.serialize();
  auto back = TensorArchive::deserialize(bytes);
  CHECK(back.metadata == "meta");
  CHECK(back.get("a") == a);
  CHECK(back.get("empty").cols() == 4);
  CHECK_THROWS_AS(back.get("b"), ValidationError);

  CHECK_THROWS_AS(TensorArchive::deserialize(std::string_view(bytes).substr(0, bytes.size() - 9)), ValidationError);
  auto bad = bytes;
  bad[bad.size() - 12] ^= 1;
  CHECK_THROWS_AS(TensorArchive::deserialize(bad), ValidationError);
  CHECK(ar.serialize() == bytes);
}
