#include <gtest/gtest.h>

#include <filesystem>

#include "txlab/cps.hpp"
#include "txlab/generate.hpp"
#include "txlab/io.hpp"

using namespace txlab;
using io::json;

TEST(Generate, BinomialDepthOne) {
  GeneratorConfig g;
  g.depth = 1;
  g.vol = 0.2;
  g.s0 = 2.0;
  const Market m = generate_market(g);
  ASSERT_EQ(m.tree().size(), 3);
  EXPECT_DOUBLE_EQ(m.price()[0], 2.0);
  EXPECT_NEAR(m.price()[1] * m.price()[2], 4.0, 1e-14);
  EXPECT_DOUBLE_EQ(m.tree().cond_prob(1), 0.5);
}

TEST(Generate, TrinomialShape) {
  GeneratorConfig g;
  g.kind = TreeKind::trinomial;
  g.depth = 2;
  const Market m = generate_market(g);
  EXPECT_EQ(m.tree().size(), 1 + 3 + 9);
  EXPECT_DOUBLE_EQ(m.tree().cond_prob(m.tree().children(0)[1]), 0.5);
}

TEST(Generate, RandomTreesAreValidAndFeasible) {
  GeneratorConfig g;
  g.kind = TreeKind::random;
  g.depth = 4;
  g.branching = 3;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    g.seed = seed;
    const Market m = generate_market(g);
    EXPECT_EQ(m.tree().horizon(), 4);
    for (int n : m.tree().interior()) {
      const auto ch = m.tree().children(n);
      EXPECT_GE(ch.size(), 2u);
      EXPECT_LE(ch.size(), 3u);
    }
    EXPECT_NO_THROW(strictly_consistent_prices(m));
  }
}

TEST(Generate, SameSeedSameBytes) {
  GeneratorConfig g;
  g.kind = TreeKind::random;
  g.depth = 3;
  g.seed = 42;
  const std::string a = io::to_json(generate_market(g)).dump(2);
  const std::string b = io::to_json(generate_market(g)).dump(2);
  EXPECT_EQ(a, b);
  g.seed = 43;
  EXPECT_NE(a, io::to_json(generate_market(g)).dump(2));
}

TEST(Generate, RejectsBadConfig) {
  GeneratorConfig g;
  g.depth = 0;
  EXPECT_THROW(generate_market(g), ConfigError);
  g.depth = 2;
  g.branching = 1;
  g.kind = TreeKind::random;
  EXPECT_THROW(generate_market(g), ConfigError);
  EXPECT_THROW(parse_tree_kind("quad"), ConfigError);
  EXPECT_EQ(parse_tree_kind("trinomial"), TreeKind::trinomial);
}

TEST(Io, MarketRoundTrip) {
  GeneratorConfig g;
  g.kind = TreeKind::random;
  g.depth = 3;
  g.seed = 8;
  const Market m = generate_market(g);
  const auto dir = std::filesystem::temp_directory_path() / "txlab_unit_io";
  io::write_json(dir / "m.json", io::to_json(m));
  const Market back = io::read_market(dir / "m.json");
  EXPECT_EQ(back.lambda(), m.lambda());
  EXPECT_EQ(back.price(), m.price());
  ASSERT_EQ(back.tree().size(), m.tree().size());
  for (int n = 0; n < m.tree().size(); ++n) {
    EXPECT_EQ(back.tree().parent(n), m.tree().parent(n));
    EXPECT_EQ(back.tree().cond_prob(n), m.tree().cond_prob(n));
  }
  std::filesystem::remove_all(dir);
}

TEST(Io, OutOfOrderIds) {
  const json j = io::parse(R"({"horizon":1,"lambda":0.1,"S":[1,1.2,0.9],
    "nodes":[{"id":2,"parent":0,"t":1,"p":0.5},{"id":0,"parent":null,"t":0,"p":1},{"id":1,"parent":0,"t":1,"p":0.5}]})");
  const Market m = io::market_from_json(j);
  EXPECT_EQ(m.tree().size(), 3);
  EXPECT_EQ(m.tree().parent(2), 0);
}

TEST(Io, ParseErrorsCarryLocation) {
  try {
    io::parse("{\n  \"horizon\": 1,\n  oops\n}", "m.json");
    FAIL();
  } catch (const io::InputError& e) {
    EXPECT_EQ(e.where().rfind("m.json:3:", 0), 0u) << e.where();
  }
}

TEST(Io, FieldErrorsCarryPath) {
  auto where = [](const char* text) {
    try {
      io::market_from_json(io::parse(text));
    } catch (const io::InputError& e) {
      return e.where();
    }
    return std::string("no error");
  };
  EXPECT_EQ(where(R"({"horizon":1,"lambda":0.1,"S":[1,1,1],"nodes":[{"id":0,"parent":null,"t":0,"p":1},{"id":1,"parent":0,"t":1,"p":"x"},{"id":2,"parent":0,"t":1,"p":0.5}]})"),
            "nodes[1].p");
  EXPECT_EQ(where(R"({"horizon":0,"lambda":0.1,"S":[1,2],"nodes":[{"id":0,"parent":null,"t":0,"p":1}]})"), "S");
  EXPECT_EQ(where(R"({"horizon":0,"lambda":0.1,"S":[1],"nodes":[{"id":0,"parent":null,"t":0,"p":1},{"id":0,"parent":null,"t":0,"p":1}]})"),
            "nodes[1].id");
  EXPECT_EQ(where(R"({"horizon":0,"S":[1],"nodes":[{"id":0,"parent":null,"t":0,"p":1}]})"), "lambda");
  EXPECT_EQ(where(R"({"horizon":0,"lambda":0.1,"S":[true],"nodes":[{"id":0,"parent":null,"t":0,"p":1}]})"), "S[0]");
}

TEST(Io, MissingFile) { EXPECT_THROW(io::read_market("/nonexistent/market.json"), io::InputError); }
