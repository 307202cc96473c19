#include "causalspan/tagging.hpp"

#include <algorithm>
#include <sstream>

namespace causalspan {

Scheme scheme_from_string(std::string_view name) {
  if (name == "bio") return Scheme::Bio;
  if (name == "iobes") return Scheme::Iobes;
  throw ValidationError("unknown tag scheme '" + std::string(name) + "' (expected bio|iobes)");
}

const char* scheme_to_string(Scheme scheme) {
  return scheme == Scheme::Bio ? "bio" : "iobes";
}

int tag_alphabet_size(Scheme scheme) { return scheme == Scheme::Bio ? 5 : 9; }

std::string tag_to_string(const Tag& tag) {
  if (tag.is_outside()) return "O";
  std::string out(1, tag.prefix);
  out += '-';
  out += tag.role == Role::Cause ? 'C' : 'E';
  return out;
}

Tag tag_from_string(std::string_view text) {
  if (text == "O") return Tag::outside();
  if (text.size() == 3 && text[1] == '-' && (text[2] == 'C' || text[2] == 'E')) {
    const char prefix = text[0];
    if (prefix == 'B' || prefix == 'I' || prefix == 'E' || prefix == 'S')
      return Tag{prefix, text[2] == 'C' ? Role::Cause : Role::Effect};
  }
  throw ValidationError("unknown tag string '" + std::string(text) + "'");
}

namespace {

// Prefix order within one role's block of the alphabet.
constexpr char kBioPrefixes[] = {'B', 'I'};
constexpr char kIobesPrefixes[] = {'B', 'I', 'E', 'S'};

int prefix_offset(char prefix, Scheme scheme) {
  const char* prefixes = scheme == Scheme::Bio ? kBioPrefixes : kIobesPrefixes;
  const int n = scheme == Scheme::Bio ? 2 : 4;
  for (int i = 0; i < n; ++i)
    if (prefixes[i] == prefix) return i;
  return -1;
}

}  // namespace

int tag_index(const Tag& tag, Scheme scheme) {
  if (tag.is_outside()) return 0;
  const int offset = prefix_offset(tag.prefix, scheme);
  if (offset < 0)
    throw ValidationError("tag '" + tag_to_string(tag) + "' is not valid under " +
                          scheme_to_string(scheme));
  const int per_role = scheme == Scheme::Bio ? 2 : 4;
  return 1 + (tag.role == Role::Cause ? 0 : per_role) + offset;
}

Tag tag_from_index(int index, Scheme scheme) {
  if (index < 0 || index >= tag_alphabet_size(scheme))
    throw ValidationError("tag index " + std::to_string(index) + " out of range");
  if (index == 0) return Tag::outside();
  const int per_role = scheme == Scheme::Bio ? 2 : 4;
  const int r = (index - 1) / per_role;
  const int offset = (index - 1) % per_role;
  const char* prefixes = scheme == Scheme::Bio ? kBioPrefixes : kIobesPrefixes;
  return Tag{prefixes[offset], r == 0 ? Role::Cause : Role::Effect};
}

TagSequence encode_spans(const std::vector<RoleSpan>& spans, int n_tokens, Scheme scheme) {
  std::vector<RoleSpan> sorted(spans);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  for (const RoleSpan& rs : sorted)
    if (rs.span.start < 0 || rs.span.start >= rs.span.end || rs.span.end > n_tokens)
      throw ValidationError("span out of bounds for encoding");
  for (size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i - 1].span.overlaps(sorted[i].span)) {
      std::ostringstream msg;
      msg << "overlapping spans [" << sorted[i - 1].span.start << ", " << sorted[i - 1].span.end
          << ") and [" << sorted[i].span.start << ", " << sorted[i].span.end
          << ") cannot be encoded as a tag sequence";
      throw ValidationError(msg.str());
    }

  TagSequence seq;
  seq.scheme = scheme;
  seq.tags.assign(static_cast<size_t>(n_tokens), Tag::outside());
  for (const RoleSpan& rs : sorted) {
    const Role role = rs.role;
    const int start = rs.span.start, end = rs.span.end;
    if (scheme == Scheme::Bio) {
      seq.tags[static_cast<size_t>(start)] = Tag{'B', role};
      for (int i = start + 1; i < end; ++i) seq.tags[static_cast<size_t>(i)] = Tag{'I', role};
    } else {
      if (end - start == 1) {
        seq.tags[static_cast<size_t>(start)] = Tag{'S', role};
      } else {
        seq.tags[static_cast<size_t>(start)] = Tag{'B', role};
        for (int i = start + 1; i < end - 1; ++i)
          seq.tags[static_cast<size_t>(i)] = Tag{'I', role};
        seq.tags[static_cast<size_t>(end - 1)] = Tag{'E', role};
      }
    }
  }
  return seq;
}

TagSequence encode(const Example& example, Scheme scheme) {
  try {
    return encode_spans(example.role_spans(), static_cast<int>(example.tokens.size()), scheme);
  } catch (const ValidationError& e) {
    throw ValidationError("example '" + example.id + "': " + e.what());
  }
}

namespace {

[[noreturn]] void strict_error(size_t position, const Tag& tag, const char* why) {
  std::ostringstream msg;
  msg << "invalid transition at position " << position << " (tag " << tag_to_string(tag)
      << "): " << why;
  throw ValidationError(msg.str());
}

std::vector<RoleSpan> decode_bio(const std::vector<Tag>& tags, bool strict) {
  std::vector<RoleSpan> spans;
  int open_start = -1;
  Role open_role = Role::Cause;
  auto close = [&](int end) {
    if (open_start >= 0) spans.push_back({TokenSpan{open_start, end}, open_role});
    open_start = -1;
  };
  for (size_t i = 0; i < tags.size(); ++i) {
    const Tag& tag = tags[i];
    switch (tag.prefix) {
      case 'O':
        close(static_cast<int>(i));
        break;
      case 'B':
        close(static_cast<int>(i));
        open_start = static_cast<int>(i);
        open_role = tag.role;
        break;
      case 'I':
        if (open_start >= 0 && open_role == tag.role) break;  // continue the run
        if (strict) strict_error(i, tag, "I must continue a same-role B or I");
        close(static_cast<int>(i));
        open_start = static_cast<int>(i);
        open_role = tag.role;
        break;
      default:
        if (strict) strict_error(i, tag, "E/S tags are not part of BIO");
        // Lenient: treat a stray E like I, a stray S like B of a 1-token span.
        if (tag.prefix == 'E') {
          if (open_start >= 0 && open_role == tag.role) {
            close(static_cast<int>(i) + 1);
          } else {
            close(static_cast<int>(i));
            spans.push_back({TokenSpan{static_cast<int>(i), static_cast<int>(i) + 1}, tag.role});
          }
        } else {
          close(static_cast<int>(i));
          spans.push_back({TokenSpan{static_cast<int>(i), static_cast<int>(i) + 1}, tag.role});
        }
        break;
    }
  }
  close(static_cast<int>(tags.size()));
  return spans;
}

std::vector<RoleSpan> decode_iobes(const std::vector<Tag>& tags, bool strict) {
  std::vector<RoleSpan> spans;
  int open_start = -1;
  Role open_role = Role::Cause;
  auto close = [&](int end) {
    if (open_start >= 0) spans.push_back({TokenSpan{open_start, end}, open_role});
    open_start = -1;
  };
  for (size_t i = 0; i < tags.size(); ++i) {
    const Tag& tag = tags[i];
    const bool continues = open_start >= 0 && !tag.is_outside() && open_role == tag.role;
    switch (tag.prefix) {
      case 'O':
        if (strict && open_start >= 0) strict_error(i, tag, "unterminated span before O");
        close(static_cast<int>(i));
        break;
      case 'S':
        if (strict && open_start >= 0) strict_error(i, tag, "unterminated span before S");
        close(static_cast<int>(i));
        spans.push_back({TokenSpan{static_cast<int>(i), static_cast<int>(i) + 1}, tag.role});
        break;
      case 'B':
        if (strict && open_start >= 0) strict_error(i, tag, "unterminated span before B");
        close(static_cast<int>(i));
        open_start = static_cast<int>(i);
        open_role = tag.role;
        break;
      case 'I':
        if (continues) break;
        if (strict) strict_error(i, tag, "I must continue a same-role B or I");
        close(static_cast<int>(i));
        open_start = static_cast<int>(i);
        open_role = tag.role;
        break;
      case 'E':
        if (continues) {
          close(static_cast<int>(i) + 1);
          break;
        }
        if (strict) strict_error(i, tag, "E must terminate a same-role B or I");
        close(static_cast<int>(i));
        spans.push_back({TokenSpan{static_cast<int>(i), static_cast<int>(i) + 1}, tag.role});
        break;
      default:
        break;
    }
  }
  if (strict && open_start >= 0)
    strict_error(tags.size() - 1, tags.back(), "unterminated span at end of sequence");
  close(static_cast<int>(tags.size()));
  return spans;
}

}  // namespace

std::vector<RoleSpan> decode(const TagSequence& sequence, DecodeMode mode) {
  const bool strict = mode == DecodeMode::Strict;
  if (strict)
    for (size_t i = 0; i < sequence.tags.size(); ++i) {
      const Tag& tag = sequence.tags[i];
      if (!tag.is_outside() && prefix_offset(tag.prefix, sequence.scheme) < 0)
        strict_error(i, tag, "tag not in scheme alphabet");
    }
  return sequence.scheme == Scheme::Bio ? decode_bio(sequence.tags, strict)
                                        : decode_iobes(sequence.tags, strict);
}

}  // namespace causalspan
