#include "turl/url_parts.hpp"

#include <algorithm>
#include <cctype>

namespace turl {

namespace {

bool looks_like_host(std::string_view s) {
  if (s.empty() || s.front() == '.' || s.find('.') == std::string_view::npos) return false;
  return std::none_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) || c == '\\' || c == '"' || c == '<' || c == '>';
  });
}

void split_authority(std::string_view authority, UrlParts& out) {
  const auto at = authority.rfind('@');
  if (at != std::string_view::npos) {
    out.userinfo = std::string(authority.substr(0, at + 1));
    authority.remove_prefix(at + 1);
  }
  std::size_t host_end = authority.size();
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    host_end = close == std::string_view::npos ? authority.size() : close + 1;
  } else {
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
      const auto digits = authority.substr(colon + 1);
      if (std::all_of(digits.begin(), digits.end(),
                      [](unsigned char c) { return std::isdigit(c); }))
        host_end = colon;
    }
  }
  out.host = std::string(authority.substr(0, host_end));
  out.port = std::string(authority.substr(host_end));
}

}  // namespace

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

UrlParts parse_url_parts(std::string_view url) {
  UrlParts out;
  std::string_view tail = url;
  const auto sep = url.find("://");
  const bool has_scheme =
      sep != std::string_view::npos && sep > 0 &&
      std::all_of(url.begin(), url.begin() + sep, [](unsigned char c) {
        return std::isalnum(c) || c == '+' || c == '-' || c == '.';
      });
  if (has_scheme) {
    out.scheme = std::string(url.substr(0, sep + 3));
    tail = url.substr(sep + 3);
  }
  const auto end = tail.find_first_of("/?#");
  const auto authority = tail.substr(0, end == std::string_view::npos ? tail.size() : end);
  if (has_scheme || looks_like_host(authority)) {
    split_authority(authority, out);
    out.rest = std::string(tail.substr(authority.size()));
  } else {
    out.rest = std::string(tail);
  }
  if (out.host.empty()) {
    // keep join() lossless without claiming any authority
    out.rest = out.userinfo + out.port + out.rest;
    out.userinfo.clear();
    out.port.clear();
  }
  return out;
}

TldBucket classify_tld(std::string_view host) {
  while (!host.empty() && host.back() == '.') host.remove_suffix(1);
  if (host.empty()) return TldBucket::Other;
  const auto dot = host.rfind('.');
  if (dot == std::string_view::npos) return TldBucket::Other;
  std::string label(host.substr(dot + 1));
  std::transform(label.begin(), label.end(), label.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (label == "com") return TldBucket::Com;
  if (label.size() == 2 && std::all_of(label.begin(), label.end(),
                                       [](unsigned char c) { return std::isalpha(c); }))
    return TldBucket::CountryCode;
  return TldBucket::Other;
}

}  // namespace turl
