#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace matgi {

// Labeled ordered tree. Leaves carry a token and no label; internal nodes
// carry a label and at least one child.
struct Tree {
  std::string label;
  std::string token;
  std::vector<Tree> children;

  static Tree leaf(std::string token);
  static Tree node(std::string label, std::vector<Tree> children);

  bool is_leaf() const noexcept { return children.empty(); }
  bool is_preterminal() const noexcept { return children.size() == 1 && children.front().is_leaf(); }

  std::vector<std::string> yield() const;
  std::size_t yield_length() const;

  friend bool operator==(const Tree&, const Tree&) = default;
};

// Bracketed form: (S (NP (PRP you)) (VP (VB go)))
std::string to_string(const Tree& t);

Tree parse_tree(std::string_view text, std::size_t line = 0);

// One bracketed tree per non-blank line.
std::vector<Tree> parse_trees(std::string_view text);

}  // namespace matgi
