// In-process TLS servers backed by OpenSSL, so engine tests run against a
// real peer without leaving the loopback interface.
#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <openssl/bio.h>
#include <openssl/err.h>
#include <openssl/pem.h>
#include <openssl/ssl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tlsfp/certs.hpp"

namespace testsrv {

struct ServerOptions {
  int min_proto = TLS1_3_VERSION;
  int max_proto = TLS1_3_VERSION;
  std::string ciphersuites;           // TLS 1.3 suite preference, OpenSSL names
  std::string cipher_list;            // TLS <= 1.2 preference
  std::vector<std::string> alpn;      // server-side preference, first match wins
  std::string groups;                 // e.g. "P-256" to force an HRR against x25519
  std::string cert_name = "server.sim.test";
  tlsfp::certs::CertProfile profile = tlsfp::certs::CertProfile::Valid;
  bool answer_http = false;           // read one request, answer a canned response
  std::string http_server = "unit-test";
  bool accept_only = false;           // accept TCP and never speak: read timeouts
};

// One listening socket on 127.0.0.1, served by a background thread until
// stop() or destruction. Handshakes are sequential; tests probe serially.
class TestServer {
 public:
  explicit TestServer(ServerOptions opts) : opts_(std::move(opts)) {
    // Probes may close mid-write; a ticket sent into a dead socket must
    // not kill the test process.
    ::signal(SIGPIPE, SIG_IGN);
    ctx_ = SSL_CTX_new(TLS_server_method());
    if (!ctx_) throw std::runtime_error("SSL_CTX_new failed");
    SSL_CTX_set_min_proto_version(ctx_, opts_.min_proto);
    SSL_CTX_set_max_proto_version(ctx_, opts_.max_proto);
    SSL_CTX_set_options(ctx_, SSL_OP_CIPHER_SERVER_PREFERENCE);
    if (!opts_.ciphersuites.empty())
      SSL_CTX_set_ciphersuites(ctx_, opts_.ciphersuites.c_str());
    if (!opts_.cipher_list.empty())
      SSL_CTX_set_cipher_list(ctx_, opts_.cipher_list.c_str());
    if (!opts_.groups.empty()) SSL_CTX_set1_groups_list(ctx_, opts_.groups.c_str());

    load_identity();
    SSL_CTX_set_app_data(ctx_, this);
    SSL_CTX_set_keylog_callback(ctx_, [](const SSL* ssl, const char* line) {
      auto* self = static_cast<TestServer*>(SSL_CTX_get_app_data(SSL_get_SSL_CTX(ssl)));
      std::lock_guard<std::mutex> lock(self->mu_);
      self->keylog_.emplace_back(line);
    });
    if (!opts_.alpn.empty()) {
      SSL_CTX_set_alpn_select_cb(
          ctx_,
          [](SSL* ssl, const unsigned char** out, unsigned char* outlen,
             const unsigned char* in, unsigned int inlen, void*) -> int {
            auto* self =
                static_cast<TestServer*>(SSL_CTX_get_app_data(SSL_get_SSL_CTX(ssl)));
            for (const auto& proto : self->opts_.alpn) {
              unsigned int i = 0;
              while (i < inlen) {
                unsigned int len = in[i];
                if (i + 1 + len > inlen) break;
                if (proto.size() == len &&
                    std::memcmp(proto.data(), in + i + 1, len) == 0) {
                  *out = in + i + 1;
                  *outlen = static_cast<unsigned char>(len);
                  return SSL_TLSEXT_ERR_OK;
                }
                i += 1 + len;
              }
            }
            return SSL_TLSEXT_ERR_NOACK;
          },
          nullptr);
    }

    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(fd_, 8) != 0)
      throw std::runtime_error("bind/listen failed");
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    thread_ = std::thread([this] { loop(); });
  }

  ~TestServer() { stop(); }

  TestServer(const TestServer&) = delete;
  TestServer& operator=(const TestServer&) = delete;

  uint16_t port() const { return port_; }

  void stop() {
    bool expected = false;
    if (!stopped_.compare_exchange_strong(expected, true)) return;
    if (thread_.joinable()) thread_.join();
    if (fd_ >= 0) ::close(fd_);
    if (ctx_) SSL_CTX_free(ctx_);
    fd_ = -1;
    ctx_ = nullptr;
  }

  size_t handshakes() const { return handshakes_.load(); }

  // Server-side key log lines collected so far.
  std::vector<std::string> keylog() const {
    std::lock_guard<std::mutex> lock(mu_);
    return keylog_;
  }

 private:
  void load_identity() {
    const auto& ca = tlsfp::certs::TestCa::builtin();
    std::string cert_pem = ca.leaf_cert_pem(opts_.cert_name, opts_.profile);
    std::string key_pem = ca.leaf_key_pem();

    BIO* bio = BIO_new_mem_buf(cert_pem.data(), static_cast<int>(cert_pem.size()));
    X509* cert = PEM_read_bio_X509(bio, nullptr, nullptr, nullptr);
    BIO_free(bio);
    if (!cert || SSL_CTX_use_certificate(ctx_, cert) != 1)
      throw std::runtime_error("server certificate rejected");
    X509_free(cert);

    bio = BIO_new_mem_buf(key_pem.data(), static_cast<int>(key_pem.size()));
    EVP_PKEY* key = PEM_read_bio_PrivateKey(bio, nullptr, nullptr, nullptr);
    BIO_free(bio);
    if (!key || SSL_CTX_use_PrivateKey(ctx_, key) != 1)
      throw std::runtime_error("server key rejected");
    EVP_PKEY_free(key);

    if (opts_.profile != tlsfp::certs::CertProfile::SelfSigned) {
      std::string ca_pem = ca.ca_pem();
      bio = BIO_new_mem_buf(ca_pem.data(), static_cast<int>(ca_pem.size()));
      X509* issuer = PEM_read_bio_X509(bio, nullptr, nullptr, nullptr);
      BIO_free(bio);
      if (issuer) SSL_CTX_add_extra_chain_cert(ctx_, issuer);  // ctx owns it now
    }
  }

  void loop() {
    while (!stopped_.load()) {
      pollfd pfd{fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, 50);
      if (rc <= 0) continue;
      int client = ::accept(fd_, nullptr, nullptr);
      if (client < 0) continue;
      serve(client);
      ::close(client);
    }
  }

  void serve(int client) {
    if (opts_.accept_only) {
      // Hold the connection open without a single TLS byte.
      char buf[256];
      while (!stopped_.load()) {
        pollfd pfd{client, POLLIN, 0};
        if (::poll(&pfd, 1, 50) > 0) {
          ssize_t n = ::recv(client, buf, sizeof(buf), 0);
          if (n <= 0) break;
        }
      }
      return;
    }
    SSL* ssl = SSL_new(ctx_);
    if (!ssl) return;
    SSL_set_fd(ssl, client);
    if (SSL_accept(ssl) == 1) {
      handshakes_.fetch_add(1);
      if (opts_.answer_http) {
        char buf[2048];
        int n = SSL_read(ssl, buf, sizeof(buf));
        if (n > 0) {
          std::string response =
              "HTTP/1.1 200 OK\r\nServer: " + opts_.http_server +
              "\r\nContent-Length: 0\r\nConnection: close\r\n\r\n";
          SSL_write(ssl, response.data(), static_cast<int>(response.size()));
        }
      }
      SSL_shutdown(ssl);
    }
    SSL_free(ssl);
  }

  ServerOptions opts_;
  SSL_CTX* ctx_ = nullptr;
  int fd_ = -1;
  uint16_t port_ = 0;
  std::thread thread_;
  std::atomic<bool> stopped_{false};
  std::atomic<size_t> handshakes_{0};
  mutable std::mutex mu_;
  std::vector<std::string> keylog_;
};

}  // namespace testsrv
