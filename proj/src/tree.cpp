#include "matgi/tree.hpp"

#include "matgi/error.hpp"
#include "matgi/text.hpp"

namespace matgi {

Tree Tree::leaf(std::string token) {
  Tree t;
  t.token = std::move(token);
  return t;
}

Tree Tree::node(std::string label, std::vector<Tree> children) {
  Tree t;
  t.label = std::move(label);
  t.children = std::move(children);
  return t;
}

namespace {

void collect_yield(const Tree& t, std::vector<std::string>& out) {
  if (t.is_leaf()) {
    out.push_back(t.token);
    return;
  }
  for (const auto& c : t.children) collect_yield(c, out);
}

void render(const Tree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.token;
    return;
  }
  out += '(';
  out += t.label;
  for (const auto& c : t.children) {
    out += ' ';
    render(c, out);
  }
  out += ')';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

class BracketReader {
 public:
  BracketReader(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  Tree read_document() {
    skip_space();
    if (at_end()) throw ParseError(line_, "empty tree");
    if (text_[pos_] != '(') throw ParseError(line_, "tree must start with '('");
    Tree t = read_node();
    skip_space();
    if (!at_end()) {
      if (text_[pos_] == ')') throw ParseError(line_, "unbalanced parentheses: unexpected ')'");
      throw ParseError(line_, "trailing material after tree");
    }
    return t;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }

  void skip_space() {
    while (!at_end() && is_space(text_[pos_])) ++pos_;
  }

  std::string read_atom() {
    std::size_t begin = pos_;
    while (!at_end() && !is_space(text_[pos_]) && text_[pos_] != '(' && text_[pos_] != ')') ++pos_;
    return std::string(text_.substr(begin, pos_ - begin));
  }

  // Called with pos_ at '('.
  Tree read_node() {
    ++pos_;
    skip_space();
    std::string label = read_atom();
    if (label.empty()) throw ParseError(line_, "node without a label");
    std::vector<Tree> children;
    bool has_token = false;
    for (;;) {
      skip_space();
      if (at_end()) throw ParseError(line_, "unbalanced parentheses: missing ')' for '" + label + "'");
      char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        children.push_back(read_node());
      } else {
        children.push_back(Tree::leaf(read_atom()));
        has_token = true;
      }
    }
    if (children.empty()) throw ParseError(line_, "node '" + label + "' has no children");
    if (has_token && children.size() != 1)
      throw ParseError(line_, "node '" + label + "' mixes tokens with other children");
    return Tree::node(std::move(label), std::move(children));
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::string> Tree::yield() const {
  std::vector<std::string> out;
  collect_yield(*this, out);
  return out;
}

std::size_t Tree::yield_length() const {
  if (is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& c : children) n += c.yield_length();
  return n;
}

std::string to_string(const Tree& t) {
  std::string out;
  render(t, out);
  return out;
}

Tree parse_tree(std::string_view text, std::size_t line) { return BracketReader(text, line).read_document(); }

std::vector<Tree> parse_trees(std::string_view text) {
  std::vector<Tree> out;
  std::size_t pos = 0, line = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line;
    auto body = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (body.empty()) continue;
    out.push_back(parse_tree(body, line));
  }
  return out;
}

}  // namespace matgi
