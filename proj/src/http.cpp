#include "cipher/http.hpp"

#include <chrono>
#include <cmath>
#include <regex>

#include <httplib.h>

namespace cipher {

std::string http_post_json(const std::string& url, const std::string& body, const Headers& headers,
                           double timeout_s) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw HttpError(HttpErrorKind::Transport, 0, "malformed URL: " + url);
  std::string base = m[1].str();
  std::string path = m[2].matched ? m[2].str() : "/";

  httplib::Client client(base);
  auto secs = static_cast<time_t>(std::floor(timeout_s));
  auto usecs = static_cast<time_t>((timeout_s - std::floor(timeout_s)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path, h, body, "application/json");
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    auto err = res.error();
    bool timed_out = err == httplib::Error::ConnectionTimeout || elapsed >= 0.9 * timeout_s;
    throw HttpError(timed_out ? HttpErrorKind::Timeout : HttpErrorKind::Transport, 0,
                    "request to " + url + " failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw HttpError(HttpErrorKind::Status, res->status,
                    "HTTP " + std::to_string(res->status) + " from " + url);
  }
  return res->body;
}

}  // namespace cipher
