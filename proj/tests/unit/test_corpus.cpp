// Copyright 2026 The KPA Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <functional>
#include <set>
#include <string>

#include "doctest.h"
#include "kpa/corpus.hpp"
#include "kpa/error.hpp"
#include "kpa/io.hpp"
#include "temp_dir.hpp"

using namespace kpa;
using kpa::testing::TempDir;

namespace {

const char* kArgs =
    "arg_id,argument,topic,stance\n"
    "a1,Uniforms are cheap,Uniforms,pro\n"
    "a2,\"Uniforms, they say, build unity\",Uniforms,PRO\n"
    "a3,Uniforms limit expression,Uniforms,-1\n";
const char* kKps =
    "key_point_id,key_point,topic,stance\n"
    "k1,Uniforms save money,Uniforms,pro\n";
const char* kLabels =
    "arg_id,key_point_id,label\n"
    "a1,k1,1\n"
    "a2,k1,0\n";

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("csv parser handles quotes, CRLF and BOM") {
  const auto t = io::parse_csv("\xEF\xBB\xBFh1,h2\r\n\"a,\"\"b\"\"\",c\r\n\"multi\nline\",d\n", "x");
  REQUIRE(t.header == std::vector<std::string>{"h1", "h2"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].fields[0] == "a,\"b\"");
  CHECK(t.rows[1].fields[0] == "multi\nline");
  CHECK(t.rows[1].line == 3);
  CHECK(t.column("h2") == 1);
  CHECK(t.column("nope") == -1);
  CHECK_THROWS_AS(io::parse_csv("a\n\"open", "x"), InputError);
}

TEST_CASE("csv escaping round-trips") {
  for (const std::string s : {"plain", "with,comma", "with \"quote\"", "new\nline"}) {
    const auto t = io::parse_csv("h\n" + io::csv_escape(s) + "\n", "x");
    CHECK(t.rows.at(0).fields.at(0) == s);
  }
}

TEST_CASE("atomic writer only publishes on commit") {
  TempDir dir;
  io::AtomicWriter w(dir / "out.txt");
  w.write("abc");
  CHECK(std::filesystem::exists(dir / "out.txt.partial"));
  CHECK_FALSE(std::filesystem::exists(dir / "out.txt"));
  w.commit();
  CHECK(kpa::testing::slurp(dir / "out.txt") == "abc");
  CHECK_FALSE(std::filesystem::exists(dir / "out.txt.partial"));
}

TEST_CASE("load_corpus counts rows") {
  TempDir dir;
  corpus::CorpusPaths paths{dir.write("a.csv", kArgs), dir.write("k.csv", kKps),
                            dir.write("l.csv", kLabels), {}};
  const corpus::Corpus c = corpus::load_corpus(paths);
  CHECK(c.counts() == corpus::CorpusCounts{3, 1, 2});
  CHECK(c.find_argument("a2")->text == "Uniforms, they say, build unity");
  CHECK(c.find_argument("a2")->stance == corpus::Stance::kPro);
  CHECK(c.find_argument("a3")->stance == corpus::Stance::kCon);
  CHECK(c.topics().size() == 1);
  SUBCASE("loading is idempotent") { CHECK(corpus::load_corpus(paths) == c); }
}

TEST_CASE("jsonl corpus mirrors csv") {
  TempDir dir;
  const auto args = dir.write("a.jsonl",
                              "{\"arg_id\":\"a1\",\"argument\":\"x y\",\"topic\":\"T\",\"stance\":\"pro\"}\n"
                              "\n"
                              "{\"arg_id\":\"a2\",\"argument\":\"z\",\"topic\":\"T\",\"stance\":\"negative\"}\n");
  const corpus::Corpus c = corpus::load_corpus({args, {}, {}, {}});
  CHECK(c.counts() == corpus::CorpusCounts{2, 0, 0});
  CHECK(c.find_argument("a2")->stance == corpus::Stance::kCon);
}

TEST_CASE("stance tokens") {
  using corpus::Stance;
  for (const char* t : {"pro", "PRO", "1", "+1", "positive", "Positive"}) {
    CHECK(corpus::parse_stance(t) == Stance::kPro);
  }
  for (const char* t : {"con", "Con", "-1", "negative"}) CHECK(corpus::parse_stance(t) == Stance::kCon);
  CHECK_THROWS_AS(corpus::parse_stance("maybe"), InputError);
}

TEST_CASE("load errors") {
  TempDir dir;
  SUBCASE("unknown stance names the line") {
    const auto p = dir.write("a.csv", "arg_id,argument,topic,stance\na1,x,T,pro\na2,y,T,maybe\n");
    const std::string msg = message_of([&] { corpus::load_corpus({p, {}, {}, {}}); });
    CHECK(msg.find("unknown stance") != std::string::npos);
    CHECK(msg.find(":3") != std::string::npos);
  }
  SUBCASE("dangling label") {
    const auto a = dir.write("a.csv", kArgs);
    const auto k = dir.write("k.csv", kKps);
    const auto l = dir.write("l.csv", "arg_id,key_point_id,label\na9,k1,1\n");
    const std::string msg = message_of([&] { corpus::load_corpus({a, k, l, {}}); });
    CHECK(msg.find("dangling reference") != std::string::npos);
  }
  SUBCASE("label across stances is rejected") {
    const auto a = dir.write("a.csv", kArgs);
    const auto k = dir.write("k.csv", kKps);
    const auto l = dir.write("l.csv", "arg_id,key_point_id,label\na3,k1,1\n");
    CHECK_THROWS_AS(corpus::load_corpus({a, k, l, {}}), InputError);
  }
  SUBCASE("empty file") {
    const auto p = dir.write("a.csv", "arg_id,argument,topic,stance\n");
    CHECK(message_of([&] { corpus::load_corpus({p, {}, {}, {}}); }).find("empty file") !=
          std::string::npos);
  }
  SUBCASE("whitespace-only text") {
    const auto p = dir.write("a.csv", "arg_id,argument,topic,stance\na1,   ,T,pro\n");
    CHECK_THROWS_AS(corpus::load_corpus({p, {}, {}, {}}), InputError);
  }
  SUBCASE("missing column") {
    const auto p = dir.write("a.csv", "arg_id,argument,topic\na1,x,T\n");
    CHECK(message_of([&] { corpus::load_corpus({p, {}, {}, {}}); }).find("missing column") !=
          std::string::npos);
  }
  SUBCASE("duplicate id") {
    const auto p = dir.write("a.csv", "arg_id,argument,topic,stance\na1,x,T,pro\na1,y,T,pro\n");
    CHECK_THROWS_AS(corpus::load_corpus({p, {}, {}, {}}), InputError);
  }
  SUBCASE("malformed jsonl line") {
    const auto p = dir.write("a.jsonl", "{\"arg_id\":\"a1\",\"argument\":\"x\",\"topic\":\"T\",\"stance\":\"pro\"}\n{oops\n");
    const std::string msg = message_of([&] { corpus::load_corpus({p, {}, {}, {}}); });
    CHECK(msg.find(":2") != std::string::npos);
  }
}

TEST_CASE("partition_corpus") {
  using corpus::Argument;
  using corpus::Stance;
  SUBCASE("one topic, 2 pro + 3 con") {
    corpus::Corpus c({{"a1", "x", "T", Stance::kCon},
                      {"a2", "x", "T", Stance::kPro},
                      {"a3", "x", "T", Stance::kCon},
                      {"a4", "x", "T", Stance::kPro},
                      {"a5", "x", "T", Stance::kCon}},
                     {}, {});
    const auto parts = corpus::partition_corpus(c);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].stance == Stance::kPro);
    CHECK(parts[0].arg_ids == std::vector<std::string>{"a2", "a4"});
    CHECK(parts[1].arg_ids.size() == 3);
  }
  SUBCASE("two topics, pro only") {
    corpus::Corpus c({{"a1", "x", "T1", Stance::kPro}, {"a2", "x", "T2", Stance::kPro}}, {}, {});
    const auto parts = corpus::partition_corpus(c);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].topic_id == "T1");
    CHECK(parts[1].topic_id == "T2");
  }
  SUBCASE("empty corpus") { CHECK(corpus::partition_corpus(corpus::Corpus{}).empty()); }
  SUBCASE("sizes add up and every argument appears once") {
    std::vector<Argument> args;
    for (int i = 0; i < 40; ++i) {
      args.push_back({"a" + std::to_string(i), "t", "T" + std::to_string(i % 3),
                      i % 2 ? Stance::kPro : Stance::kCon});
    }
    corpus::Corpus c(args, {}, {});
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& p : corpus::partition_corpus(c)) {
      total += p.arg_ids.size();
      for (const auto& id : p.arg_ids) {
        CHECK(seen.insert(id).second);
        const auto* a = c.find_argument(id);
        CHECK(a->topic_id == p.topic_id);
        CHECK(a->stance == p.stance);
      }
    }
    CHECK(total == args.size());
  }
}

TEST_CASE("zero labels may be present or absent") {
  TempDir dir;
  const auto a = dir.write("a.csv", kArgs);
  const auto k = dir.write("k.csv", kKps);
  const auto l = dir.write("l.csv", "arg_id,key_point_id,label\na1,k1,1\n");
  CHECK(corpus::load_corpus({a, k, l, {}}).counts() == corpus::CorpusCounts{3, 1, 1});
}
