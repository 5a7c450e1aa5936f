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

#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "glyforge/error.hpp"

namespace glyforge {

// One glycosidic linkage annotation. Each field may be '?' when the source
// string leaves it undetermined.
struct LinkageType {
  char anomer = '?';    // 'a', 'b' or '?'
  char donor = '?';     // '1', '2' or '?'
  char acceptor = '?';  // '1'..'9' or '?'

  std::string str() const {
    std::string s;
    s.push_back(anomer);
    s.push_back(donor);
    s.push_back('-');
    s.push_back(acceptor);
    return s;
  }

  bool fully_determined() const {
    return anomer != '?' && donor != '?' && acceptor != '?';
  }

  auto operator<=>(const LinkageType&) const = default;
};

struct Token {
  enum class Kind { mono, linkage, lbracket, rbracket };

  Kind kind;
  std::size_t position = 0;  // byte offset of the first character
  std::string lexeme;        // exact source slice
  LinkageType linkage;       // meaningful only for Kind::linkage
};

namespace detail {

inline bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_alnum(char c) {
  return is_letter(c) || (c >= '0' && c <= '9');
}

}  // namespace detail

// Splits condensed notation into residue names, linkage annotations and
// brackets. Concatenating the lexemes of the result reproduces the input,
// so no characters are ever skipped.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (detail::is_letter(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && detail::is_alnum(text[j])) ++j;
      tokens.push_back({Token::Kind::mono, i, std::string(text.substr(i, j - i)), {}});
      i = j;
    } else if (c == '[') {
      tokens.push_back({Token::Kind::lbracket, i, "[", {}});
      ++i;
    } else if (c == ']') {
      tokens.push_back({Token::Kind::rbracket, i, "]", {}});
      ++i;
    } else if (c == '(') {
      const std::size_t start = i;
      // Layout is "(XY-Z)": anomer, donor position, dash, acceptor position.
      LinkageType link;
      std::size_t j = i + 1;
      auto need = [&](auto&& accept, const char* what) -> char {
        if (j >= text.size()) {
          throw ParseError(ParseError::Kind::unterminated_linkage,
                           "unterminated linkage annotation", start);
        }
        const char got = text[j];
        if (!accept(got)) {
          throw ParseError(ParseError::Kind::unexpected_character,
                           std::string("expected ") + what + " in linkage", j);
        }
        ++j;
        return got;
      };
      link.anomer = need([](char x) { return x == 'a' || x == 'b' || x == '?'; },
                         "anomeric configuration 'a', 'b' or '?'");
      link.donor = need([](char x) { return x == '1' || x == '2' || x == '?'; },
                        "donor position '1', '2' or '?'");
      need([](char x) { return x == '-'; }, "'-'");
      link.acceptor = need([](char x) { return (x >= '1' && x <= '9') || x == '?'; },
                           "acceptor position '1'..'9' or '?'");
      need([](char x) { return x == ')'; }, "')'");
      tokens.push_back({Token::Kind::linkage, start, std::string(text.substr(start, j - start)), link});
      i = j;
    } else {
      throw ParseError(ParseError::Kind::unexpected_character,
                       std::string("unexpected character '") + c + "'", i);
    }
  }
  return tokens;
}

// Rooted tree of monosaccharides. Node ids are indices into `nodes`; edges
// run child to parent, mirroring the reading order of the notation.
struct GlycanTree {
  struct Node {
    std::string name;
  };

  struct Edge {
    int child = 0;
    int parent = 0;
    LinkageType linkage;
  };

  std::vector<Node> nodes;
  std::vector<Edge> edges;
  int root = 0;

  std::size_t size() const { return nodes.size(); }

  // children_of[p] lists (linkage, child) pairs in edge insertion order.
  std::vector<std::vector<std::pair<LinkageType, int>>> children_of() const {
    std::vector<std::vector<std::pair<LinkageType, int>>> out(nodes.size());
    for (const auto& e : edges) out[static_cast<std::size_t>(e.parent)].push_back({e.linkage, e.child});
    return out;
  }
};

// Structural sanity check: single root, every other node has exactly one
// parent, and everything is reachable from the root.
inline void validate(const GlycanTree& tree) {
  const std::size_t n = tree.nodes.size();
  if (n == 0) throw DataError("glycan tree has no residues");
  if (tree.root < 0 || static_cast<std::size_t>(tree.root) >= n) {
    throw IndexError("glycan tree root id out of range");
  }
  std::vector<int> parent_count(n, 0);
  for (const auto& e : tree.edges) {
    if (e.child < 0 || static_cast<std::size_t>(e.child) >= n || e.parent < 0 ||
        static_cast<std::size_t>(e.parent) >= n) {
      throw IndexError("glycan tree edge references an unknown node");
    }
    ++parent_count[static_cast<std::size_t>(e.child)];
  }
  if (parent_count[static_cast<std::size_t>(tree.root)] != 0) {
    throw DataError("glycan tree root must not have a parent");
  }
  std::size_t linked = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(i) == tree.root) continue;
    if (parent_count[i] != 1) throw DataError("glycan tree node must have exactly one parent");
    ++linked;
  }
  if (linked + 1 != n || tree.edges.size() != n - 1) {
    throw DataError("glycan tree edge count does not match node count");
  }
  // Reachability from the root; with the counts above this also rules out cycles.
  auto children = tree.children_of();
  std::vector<int> stack = {tree.root};
  std::size_t seen = 0;
  std::vector<bool> visited(n, false);
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (visited[static_cast<std::size_t>(v)]) throw DataError("glycan tree contains a cycle");
    visited[static_cast<std::size_t>(v)] = true;
    ++seen;
    for (const auto& [link, child] : children[static_cast<std::size_t>(v)]) {
      (void)link;
      stack.push_back(child);
    }
  }
  if (seen != n) throw DataError("glycan tree is not connected");
}

namespace detail {

struct ParseCursor {
  std::span<const Token> tokens;
  std::size_t i = 0;

  bool done() const { return i >= tokens.size(); }
  const Token* peek(std::size_t ahead = 0) const {
    return i + ahead < tokens.size() ? &tokens[i + ahead] : nullptr;
  }
  const Token& take() { return tokens[i++]; }
};

// Parses one glycan sequence and returns the id of its final residue. Inside
// brackets the sequence stops just before the linkage that belongs to the
// bracket unit itself.
inline int parse_sequence(ParseCursor& cur, GlycanTree& tree, bool in_bracket) {
  std::vector<std::pair<int, LinkageType>> pending;  // children awaiting a parent

  auto attach = [&tree, &pending](int parent) {
    for (const auto& [child, linkage] : pending) {
      tree.edges.push_back({child, parent, linkage});
    }
    pending.clear();
  };

  while (true) {
    const Token* tok = cur.peek();
    if (tok == nullptr) {
      if (in_bracket) {
        throw ParseError(ParseError::Kind::unbalanced_brackets, "unclosed '['");
      }
      if (!pending.empty()) {
        throw ParseError(ParseError::Kind::dangling_linkage,
                         "linkage is not followed by a residue");
      }
      throw ParseError(ParseError::Kind::empty_input, "input holds no residue");
    }
    switch (tok->kind) {
      case Token::Kind::mono: {
        const Token* next = cur.peek(1);
        const bool chained = next != nullptr && next->kind == Token::Kind::linkage;
        const Token* after = cur.peek(2);
        const bool closes_bracket =
            in_bracket && chained && after != nullptr && after->kind == Token::Kind::rbracket;
        if (chained && !closes_bracket) {
          const Token mono = cur.take();
          const Token link = cur.take();
          const int node = static_cast<int>(tree.nodes.size());
          tree.nodes.push_back({mono.lexeme});
          attach(node);
          pending.push_back({node, link.linkage});
          break;
        }
        // Final residue of this sequence. When it closes a bracket the
        // trailing linkage is consumed by the caller.
        const Token mono = cur.take();
        const int node = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({mono.lexeme});
        attach(node);
        if (!in_bracket && !cur.done()) {
          throw ParseError(ParseError::Kind::unexpected_token,
                           "content remains after the root residue", cur.peek()->position);
        }
        if (in_bracket && !closes_bracket) {
          const Token* stray = cur.peek();
          if (stray == nullptr) {
            throw ParseError(ParseError::Kind::unbalanced_brackets, "unclosed '['");
          }
          if (stray->kind == Token::Kind::rbracket) {
            throw ParseError(ParseError::Kind::dangling_linkage,
                             "bracketed branch must end with a linkage", stray->position);
          }
          throw ParseError(ParseError::Kind::unexpected_token,
                           "bracketed branch must end with a linkage then ']'",
                           stray->position);
        }
        return node;
      }
      case Token::Kind::lbracket: {
        const Token open = cur.take();
        (void)open;
        const int branch = parse_sequence(cur, tree, true);
        const Token* link = cur.peek();
        if (link == nullptr || link->kind != Token::Kind::linkage) {
          throw ParseError(ParseError::Kind::dangling_linkage,
                           "bracketed branch must end with a linkage",
                           link == nullptr ? ParseError::npos : link->position);
        }
        const Token linkage = cur.take();
        const Token* close = cur.peek();
        if (close == nullptr || close->kind != Token::Kind::rbracket) {
          throw ParseError(ParseError::Kind::unbalanced_brackets, "unclosed '['",
                           close == nullptr ? ParseError::npos : close->position);
        }
        cur.take();
        pending.push_back({branch, linkage.linkage});
        break;
      }
      case Token::Kind::rbracket: {
        if (!in_bracket) {
          throw ParseError(ParseError::Kind::unbalanced_brackets, "']' without matching '['",
                           tok->position);
        }
        if (!pending.empty()) {
          throw ParseError(ParseError::Kind::dangling_linkage,
                           "linkage is not followed by a residue", tok->position);
        }
        throw ParseError(ParseError::Kind::unexpected_token, "bracket holds no residue",
                         tok->position);
      }
      case Token::Kind::linkage: {
        throw ParseError(ParseError::Kind::unexpected_token,
                         "linkage must follow a residue or bracketed branch", tok->position);
      }
    }
  }
}

}  // namespace detail

// Parses condensed notation into a rooted tree. The rightmost residue at
// the top level is the root and edges point child to parent.
inline GlycanTree parse_glycan(std::string_view text) {
  if (text.empty()) {
    throw ParseError(ParseError::Kind::empty_input, "input holds no residue");
  }
  const std::vector<Token> tokens = tokenize(text);
  GlycanTree tree;
  detail::ParseCursor cur{tokens, 0};
  tree.root = detail::parse_sequence(cur, tree, false);
  validate(tree);
  return tree;
}

// Canonical rendering: children of each residue are ordered by linkage
// string, then by their own canonical form. Two parses of equivalent
// notation produce the same string.
inline std::string canonicalize(const GlycanTree& tree) {
  validate(tree);
  const auto children = tree.children_of();
  std::vector<std::string> canon(tree.nodes.size());
  // Post-order render. Children were validated acyclic, so the explicit
  // stack terminates.
  std::vector<std::pair<int, bool>> stack = {{tree.root, false}};
  while (!stack.empty()) {
    auto [node, expanded] = stack.back();
    stack.pop_back();
    const auto& kids = children[static_cast<std::size_t>(node)];
    if (!expanded) {
      stack.push_back({node, true});
      for (const auto& [link, child] : kids) {
        (void)link;
        stack.push_back({child, false});
      }
      continue;
    }
    std::vector<std::pair<std::string, int>> ordered;  // (linkage string, child)
    ordered.reserve(kids.size());
    for (const auto& [link, child] : kids) ordered.push_back({link.str(), child});
    std::sort(ordered.begin(), ordered.end(), [&canon](const auto& lhs, const auto& rhs) {
      if (lhs.first != rhs.first) return lhs.first < rhs.first;
      return canon[static_cast<std::size_t>(lhs.second)] <
             canon[static_cast<std::size_t>(rhs.second)];
    });
    std::string out;
    for (std::size_t k = 0; k < ordered.size(); ++k) {
      const auto& [link_str, child] = ordered[k];
      const std::string unit = canon[static_cast<std::size_t>(child)] + "(" + link_str + ")";
      if (k == 0) {
        out += unit;
      } else {
        out += "[" + unit + "]";
      }
    }
    out += tree.nodes[static_cast<std::size_t>(node)].name;
    canon[static_cast<std::size_t>(node)] = std::move(out);
  }
  return canon[static_cast<std::size_t>(tree.root)];
}

inline std::string canonicalize(std::string_view text) {
  return canonicalize(parse_glycan(text));
}

// Monosaccharide vocabulary: the distinct residue names of a corpus in
// sorted order, with one reserved mask entry at the end. The mask name
// contains '-', which the name grammar forbids, so it cannot collide.
struct MonoVocab {
  static constexpr const char* mask_name = "Unknown-Monosaccharide";

  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }
  std::size_t unknown_id() const { return names.size() - 1; }

  std::optional<int> find(std::string_view name) const {
    if (names.empty()) return std::nullopt;
    const auto it = std::lower_bound(names.begin(), names.end() - 1, name);
    if (it == names.end() - 1 || *it != name) return std::nullopt;
    return static_cast<int>(it - names.begin());
  }

  int id_of(std::string_view name) const {
    const auto found = find(name);
    if (!found) throw VocabError("unknown monosaccharide: " + std::string(name));
    return *found;
  }
};

// Linkage vocabulary: distinct linkage types in sorted order. Each entry
// owns two directional relations, child to parent at 2*i and parent to
// child at 2*i + 1.
struct LinkageVocab {
  std::vector<LinkageType> linkages;

  std::size_t size() const { return linkages.size(); }
  std::size_t num_relations() const { return 2 * linkages.size(); }

  std::optional<int> find(const LinkageType& link) const {
    const auto it = std::lower_bound(linkages.begin(), linkages.end(), link);
    if (it == linkages.end() || !(*it == link)) return std::nullopt;
    return static_cast<int>(it - linkages.begin());
  }

  int index_of(const LinkageType& link) const {
    const auto found = find(link);
    if (!found) throw VocabError("unknown linkage: " + link.str());
    return *found;
  }

  int forward_relation(const LinkageType& link) const { return 2 * index_of(link); }
  int reverse_relation(const LinkageType& link) const { return 2 * index_of(link) + 1; }

  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    out.reserve(linkages.size());
    for (const auto& link : linkages) out.push_back(link.str());
    return out;
  }
};

inline std::pair<MonoVocab, LinkageVocab> build_vocabularies(
    std::span<const GlycanTree> corpus) {
  if (corpus.empty()) throw DataError("cannot build vocabularies from an empty corpus");
  std::set<std::string> names;
  std::set<LinkageType> linkages;
  for (const auto& tree : corpus) {
    for (const auto& node : tree.nodes) names.insert(node.name);
    for (const auto& edge : tree.edges) linkages.insert(edge.linkage);
  }
  MonoVocab mono;
  mono.names.assign(names.begin(), names.end());
  mono.names.push_back(MonoVocab::mask_name);
  LinkageVocab link;
  link.linkages.assign(linkages.begin(), linkages.end());
  return {std::move(mono), std::move(link)};
}

}  // namespace glyforge
