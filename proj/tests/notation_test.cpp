// Copyright 2026 The Glyforge Authors
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

#include "glyforge/notation.hpp"

#include <gtest/gtest.h>

#include <map>
#include <string>
#include <vector>

#include "glyforge/rng.hpp"

namespace glyforge {
namespace {

std::string concat_lexemes(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += t.lexeme;
  return out;
}

TEST(Tokenize, RoundTripsLexemes) {
  const char* inputs[] = {
      "Glc",
      "Gal(b1-4)Glc",
      "Man(a1-3)[Man(a1-6)]Man",
      "Neu5Ac(a2-3)Gal(b1-4)[Fuc(a1-3)]GlcNAc",
      "Gal(?1-4)Glc",
      "Gal(b?-?)Glc",
  };
  for (const auto* input : inputs) {
    const auto tokens = tokenize(input);
    EXPECT_EQ(concat_lexemes(tokens), input) << input;
  }
}

TEST(Tokenize, ClassifiesTokens) {
  const auto tokens = tokenize("Man(a1-3)[Man(a1-6)]Man");
  ASSERT_EQ(tokens.size(), 7u);
  EXPECT_EQ(tokens[0].kind, Token::Kind::mono);
  EXPECT_EQ(tokens[0].lexeme, "Man");
  EXPECT_EQ(tokens[1].kind, Token::Kind::linkage);
  EXPECT_EQ(tokens[1].linkage.str(), "a1-3");
  EXPECT_EQ(tokens[2].kind, Token::Kind::lbracket);
  EXPECT_EQ(tokens[6].kind, Token::Kind::mono);
  EXPECT_EQ(tokens[1].position, 3u);
}

TEST(Tokenize, RejectsUnexpectedCharacters) {
  struct Case {
    const char* input;
    std::size_t position;
  };
  const Case cases[] = {
      {"Gal Glc", 3},       // whitespace is not part of the notation
      {"4Gal", 0},          // names start with a letter
      {"Gal(g1-4)Glc", 4},  // anomer must be a, b or ?
      {"Gal(b3-4)Glc", 5},  // donor must be 1, 2 or ?
      {"Gal(b1=4)Glc", 6},  // separator must be -
      {"Gal(b1-0)Glc", 7},  // acceptor must be 1..9 or ?
      {"Gal(b1-44)Glc", 8},
      {"Gal*Glc", 3},
  };
  for (const auto& c : cases) {
    try {
      tokenize(c.input);
      FAIL() << "expected ParseError for " << c.input;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.kind(), ParseError::Kind::unexpected_character) << c.input;
      EXPECT_EQ(e.position(), c.position) << c.input;
    }
  }
}

TEST(Tokenize, RejectsUnterminatedLinkage) {
  for (const char* input : {"Gal(b1-4", "Gal(b1-", "Gal(b1", "Gal(b", "Gal("}) {
    try {
      tokenize(input);
      FAIL() << "expected ParseError for " << input;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.kind(), ParseError::Kind::unterminated_linkage) << input;
      EXPECT_EQ(e.position(), 3u) << input;
    }
  }
}

TEST(Parse, LinearChain) {
  const auto tree = parse_glycan("Gal(b1-4)Glc");
  ASSERT_EQ(tree.size(), 2u);
  EXPECT_EQ(tree.nodes[static_cast<std::size_t>(tree.root)].name, "Glc");
  ASSERT_EQ(tree.edges.size(), 1u);
  EXPECT_EQ(tree.nodes[static_cast<std::size_t>(tree.edges[0].child)].name, "Gal");
  EXPECT_EQ(tree.edges[0].parent, tree.root);
  EXPECT_EQ(tree.edges[0].linkage.str(), "b1-4");
}

TEST(Parse, ReadingOrderIsChildToParent) {
  const auto tree = parse_glycan("Neu5Ac(a2-3)Gal(b1-4)Glc");
  ASSERT_EQ(tree.size(), 3u);
  std::map<std::string, std::string> parent_of;
  for (const auto& e : tree.edges) {
    parent_of[tree.nodes[static_cast<std::size_t>(e.child)].name] =
        tree.nodes[static_cast<std::size_t>(e.parent)].name;
  }
  EXPECT_EQ(parent_of["Neu5Ac"], "Gal");
  EXPECT_EQ(parent_of["Gal"], "Glc");
  EXPECT_EQ(tree.nodes[static_cast<std::size_t>(tree.root)].name, "Glc");
}

TEST(Parse, BranchAttachesToFollowingResidue) {
  const auto tree = parse_glycan("Man(a1-3)[Man(a1-6)]Man");
  ASSERT_EQ(tree.size(), 3u);
  ASSERT_EQ(tree.edges.size(), 2u);
  EXPECT_EQ(tree.edges[0].parent, tree.root);
  EXPECT_EQ(tree.edges[1].parent, tree.root);
  std::vector<std::string> linkages = {tree.edges[0].linkage.str(), tree.edges[1].linkage.str()};
  std::sort(linkages.begin(), linkages.end());
  EXPECT_EQ(linkages[0], "a1-3");
  EXPECT_EQ(linkages[1], "a1-6");
}

TEST(Parse, BracketBeforeChainedResidue) {
  // The bracket group hangs off the residue right after the bracket, which
  // is itself a child further down the chain.
  const auto tree = parse_glycan("Gal(b1-4)[Fuc(a1-3)]GlcNAc(b1-2)Man");
  ASSERT_EQ(tree.size(), 4u);
  std::map<std::string, std::string> parent_of;
  for (const auto& e : tree.edges) {
    parent_of[tree.nodes[static_cast<std::size_t>(e.child)].name] =
        tree.nodes[static_cast<std::size_t>(e.parent)].name;
  }
  EXPECT_EQ(parent_of["Gal"], "GlcNAc");
  EXPECT_EQ(parent_of["Fuc"], "GlcNAc");
  EXPECT_EQ(parent_of["GlcNAc"], "Man");
  EXPECT_EQ(tree.nodes[static_cast<std::size_t>(tree.root)].name, "Man");
}

TEST(Parse, NestedBrackets) {
  const auto tree = parse_glycan("Gal(b1-4)[Neu5Ac(a2-3)[Fuc(a1-4)]Gal(b1-3)]GlcNAc");
  ASSERT_EQ(tree.size(), 5u);
  std::map<std::string, int> degree;
  for (const auto& e : tree.edges) {
    ++degree[tree.nodes[static_cast<std::size_t>(e.parent)].name];
  }
  EXPECT_EQ(degree["GlcNAc"], 2);
  EXPECT_EQ(degree["Gal"], 2);  // the inner Gal carries Neu5Ac and Fuc
}

TEST(Parse, SingleResidue) {
  const auto tree = parse_glycan("GlcNAc");
  EXPECT_EQ(tree.size(), 1u);
  EXPECT_TRUE(tree.edges.empty());
}

TEST(Parse, WildcardLinkages) {
  const auto tree = parse_glycan("Gal(?1-?)Glc");
  ASSERT_EQ(tree.edges.size(), 1u);
  EXPECT_FALSE(tree.edges[0].linkage.fully_determined());
  EXPECT_EQ(tree.edges[0].linkage.anomer, '?');
  EXPECT_EQ(tree.edges[0].linkage.acceptor, '?');
  EXPECT_TRUE(parse_glycan("Gal(b1-4)Glc").edges[0].linkage.fully_determined());
}

TEST(Parse, ErrorKinds) {
  struct Case {
    const char* input;
    ParseError::Kind kind;
  };
  const Case cases[] = {
      {"", ParseError::Kind::empty_input},
      {"Gal(b1-4)", ParseError::Kind::dangling_linkage},
      {"Man(a1-3)[Man(a1-6)]", ParseError::Kind::dangling_linkage},
      {"[Man]Glc", ParseError::Kind::dangling_linkage},
      {"[Man(a1-3)Man", ParseError::Kind::unbalanced_brackets},
      {"Man(a1-3)]Man", ParseError::Kind::unbalanced_brackets},
      {"(b1-4)Glc", ParseError::Kind::unexpected_token},
      {"[]Glc", ParseError::Kind::unexpected_token},
      {"Man[Gal(b1-4)]Man", ParseError::Kind::unexpected_token},
  };
  for (const auto& c : cases) {
    try {
      parse_glycan(c.input);
      FAIL() << "expected ParseError for '" << c.input << "'";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.kind(), c.kind) << c.input;
    }
  }
}

TEST(Canonical, BranchOrderIsStable) {
  const auto a = canonicalize("Man(a1-3)[Man(a1-6)]Man");
  const auto b = canonicalize("Man(a1-6)[Man(a1-3)]Man");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, "Man(a1-3)[Man(a1-6)]Man");
}

TEST(Canonical, TieBreaksOnSubtree) {
  const auto a = canonicalize("Gal(b1-4)[Glc(b1-4)]Man");
  const auto b = canonicalize("Glc(b1-4)[Gal(b1-4)]Man");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, "Gal(b1-4)[Glc(b1-4)]Man");
}

TEST(Canonical, Idempotent) {
  const char* inputs[] = {
      "Glc",
      "Neu5Ac(a2-3)Gal(b1-4)[Fuc(a1-3)]GlcNAc(b1-2)Man",
      "Man(a1-6)[Man(a1-3)]Man(b1-4)GlcNAc(b1-4)GlcNAc",
  };
  for (const auto* input : inputs) {
    const auto once = canonicalize(input);
    EXPECT_EQ(canonicalize(once), once) << input;
  }
}

// Independent oracle for the parser: build a random tree directly, render
// it, and check the parse inverts the rendering.
struct RandomTree {
  GlycanTree tree;
};

RandomTree random_tree(Rng& rng, std::size_t max_nodes) {
  static const std::vector<std::string> names = {"Glc", "Gal", "Man", "Fuc",
                                                 "GlcNAc", "Neu5Ac", "Xyl"};
  static const std::vector<std::string> anomers = {"a", "b", "?"};
  RandomTree out;
  const std::size_t n = 1 + rng.below(max_nodes);
  for (std::size_t i = 0; i < n; ++i) {
    out.tree.nodes.push_back({names[rng.below(names.size())]});
  }
  // Node 0 is the root; every later node picks an earlier parent.
  out.tree.root = 0;
  for (std::size_t i = 1; i < n; ++i) {
    LinkageType link;
    link.anomer = anomers[rng.below(anomers.size())][0];
    link.donor = rng.below(2) == 0 ? '1' : '2';
    link.acceptor = static_cast<char>('1' + rng.below(9));
    out.tree.edges.push_back({static_cast<int>(i), static_cast<int>(rng.below(i)), link});
  }
  return out;
}

std::string render(const GlycanTree& tree, int node) {
  std::string out;
  std::vector<std::pair<LinkageType, int>> kids;
  for (const auto& e : tree.edges) {
    if (e.parent == node) kids.push_back({e.linkage, e.child});
  }
  for (std::size_t k = 0; k < kids.size(); ++k) {
    const std::string unit = render(tree, kids[k].second) + "(" + kids[k].first.str() + ")";
    out += k == 0 ? unit : "[" + unit + "]";
  }
  return out + tree.nodes[static_cast<std::size_t>(node)].name;
}

TEST(Parse, RandomTreesRoundTripThroughRendering) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto sample = random_tree(rng, 12);
    const std::string text = render(sample.tree, sample.tree.root);
    const auto parsed = parse_glycan(text);
    ASSERT_EQ(parsed.size(), sample.tree.size()) << text;
    EXPECT_EQ(canonicalize(parsed), canonicalize(sample.tree)) << text;
  }
}

// Mutations from these classes can never yield a well-formed string, so the
// parser must always raise a structured error and never crash.
TEST(Parse, MalformedInputsAlwaysRaiseParseError) {
  Rng rng(11);
  const std::string base = "Neu5Ac(a2-3)Gal(b1-4)[Fuc(a1-3)]GlcNAc(b1-2)Man";
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::string mutated = base;
    switch (trial % 5) {
      case 0:  // illegal character insertion
        mutated.insert(rng.below(mutated.size() + 1), 1, '*');
        break;
      case 1: {  // drop one bracket, leaving the other unmatched
        const std::size_t k = mutated.find(trial % 2 == 0 ? '[' : ']');
        mutated.erase(k, 1);
        break;
      }
      case 2:  // trailing half linkage
        mutated += "(b1-";
        break;
      case 3:  // truncate inside the first linkage
        mutated = mutated.substr(0, mutated.find('(') + 2);
        break;
      case 4:  // stray closing bracket at the front
        mutated.insert(0, 1, ']');
        break;
    }
    try {
      parse_glycan(mutated);
      FAIL() << "expected ParseError for '" << mutated << "'";
    } catch (const ParseError&) {
      ++checked;
    }
  }
  EXPECT_EQ(checked, 500);
}

TEST(Vocab, BuildFromCorpus) {
  std::vector<GlycanTree> corpus = {
      parse_glycan("Gal(b1-4)Glc"),
      parse_glycan("Man(a1-3)[Man(a1-6)]Man"),
      parse_glycan("Neu5Ac(a2-3)Gal(b1-4)GlcNAc"),
  };
  const auto [mono, linkage] = build_vocabularies(corpus);
  // Distinct names sorted, with the mask entry last.
  const std::vector<std::string> expected = {"Gal", "Glc", "GlcNAc", "Man",
                                             "Neu5Ac", MonoVocab::mask_name};
  EXPECT_EQ(mono.names, expected);
  EXPECT_EQ(mono.unknown_id(), 5u);
  EXPECT_EQ(mono.id_of("Gal"), 0);
  EXPECT_EQ(mono.id_of("Neu5Ac"), 4);
  EXPECT_FALSE(mono.find("Fuc").has_value());
  EXPECT_THROW(mono.id_of("Fuc"), VocabError);
  // The mask name is reserved, not searchable.
  EXPECT_FALSE(mono.find(MonoVocab::mask_name).has_value());

  ASSERT_EQ(linkage.size(), 4u);
  EXPECT_EQ(linkage.num_relations(), 8u);
  EXPECT_EQ(linkage.linkages[0].str(), "a1-3");
  EXPECT_EQ(linkage.linkages[1].str(), "a1-6");
  EXPECT_EQ(linkage.linkages[2].str(), "a2-3");
  EXPECT_EQ(linkage.linkages[3].str(), "b1-4");
  LinkageType b14{'b', '1', '4'};
  EXPECT_EQ(linkage.forward_relation(b14), 6);
  EXPECT_EQ(linkage.reverse_relation(b14), 7);
  LinkageType missing{'a', '2', '6'};
  EXPECT_FALSE(linkage.find(missing).has_value());
  EXPECT_THROW(linkage.forward_relation(missing), VocabError);
}

TEST(Vocab, EmptyCorpusIsRejected) {
  std::vector<GlycanTree> corpus;
  EXPECT_THROW(build_vocabularies(corpus), DataError);
}

}  // namespace
}  // namespace glyforge
