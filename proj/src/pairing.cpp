#include "abe_cities/pairing.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace abe_cities::pairing {

namespace {

constexpr const char* kQ =
    "878071079966331252243778198475404981580688319941420821102865339926647563088022295707862517"
    "9422662221423155858769582317459277713367317481324925129998224791";
constexpr const char* kR = "730750818665451621361119245571504901405976559617";
constexpr const char* kH =
    "12016012264891146079388821366740534204802954401251311822919615131047207289359704531102844"
    "802183906537786776";

mpz_srcptr Q() {
  static mpz_srcptr q = curve().q.get_mpz_t();
  return q;
}

// Products are reduced through a per-thread scratch value; every stored field
// element stays in [0, q).
struct Scratch {
  mpz_t t;
  Scratch() { mpz_init2(t, 1088); }
  ~Scratch() { mpz_clear(t); }
};
thread_local Scratch scratch;

class Fe {
 public:
  Fe() { mpz_init2(v_, 576); }
  explicit Fe(mpz_srcptr v) { mpz_init_set(v_, v); }
  Fe(const Fe& o) { mpz_init_set(v_, o.v_); }
  Fe& operator=(const Fe& o) {
    mpz_set(v_, o.v_);
    return *this;
  }
  ~Fe() { mpz_clear(v_); }
  operator mpz_ptr() { return v_; }
  operator mpz_srcptr() const { return v_; }

 private:
  mpz_t v_;
};

inline int sgn(mpz_srcptr a) { return mpz_sgn(a); }

inline void fmul(mpz_ptr r, mpz_srcptr a, mpz_srcptr b) {
  mpz_mul(scratch.t, a, b);
  mpz_tdiv_r(r, scratch.t, Q());
}
inline void fsqr(mpz_ptr r, mpz_srcptr a) {
  mpz_mul(scratch.t, a, a);
  mpz_tdiv_r(r, scratch.t, Q());
}
inline void fadd(mpz_ptr r, mpz_srcptr a, mpz_srcptr b) {
  mpz_add(r, a, b);
  if (mpz_cmp(r, Q()) >= 0) mpz_sub(r, r, Q());
}
inline void fsub(mpz_ptr r, mpz_srcptr a, mpz_srcptr b) {
  mpz_sub(r, a, b);
  if (mpz_sgn(r) < 0) mpz_add(r, r, Q());
}
inline void fdbl(mpz_ptr r, mpz_srcptr a) { fadd(r, a, a); }
inline void fneg(mpz_ptr r, mpz_srcptr a) {
  if (mpz_sgn(a) == 0) mpz_set_ui(r, 0); else mpz_sub(r, Q(), a);
}
inline void finv(mpz_ptr r, mpz_srcptr a) {
  if (mpz_invert(r, a, Q()) == 0) throw std::domain_error("inverse of zero in F_q");
}

// Jacobian coordinates: x = X / Z^2, y = Y / Z^3.
struct Jac {
  Fe X, Y, Z;
  bool inf = true;
};

// Line value at the distorted point psi(Q) = (-xq, i*yq), scaled by an F_q
// factor which the final exponentiation removes.
struct Line {
  Fe re, im;
};

void set_affine(Jac& j, mpz_srcptr x, mpz_srcptr y) {
  mpz_set(j.X, x);
  mpz_set(j.Y, y);
  mpz_set_ui(j.Z, 1);
  j.inf = false;
}

// T <- 2T; when `line` is non-null also evaluates the tangent at psi(Q).
void jac_double(Jac& t, Line* line, mpz_srcptr xq, mpz_srcptr yq) {
  if (t.inf) return;
  if (sgn(t.Y) == 0) {
    t.inf = true;
    return;
  }
  Fe xx, yy, yyyy, zz, s, m, tmp, x3, z3;
  fsqr(xx, t.X);
  fsqr(yy, t.Y);
  fsqr(yyyy, yy);
  fsqr(zz, t.Z);
  fmul(s, t.X, yy);
  fdbl(s, s);
  fdbl(s, s);
  fsqr(m, zz);
  fadd(m, m, xx);
  fadd(m, m, xx);
  fadd(m, m, xx);
  fmul(z3, t.Y, t.Z);
  fdbl(z3, z3);
  if (line) {
    fmul(tmp, xq, zz);
    fadd(tmp, tmp, t.X);
    fmul(line->re, m, tmp);
    fdbl(tmp, yy);
    fsub(line->re, line->re, tmp);
    fmul(line->im, z3, zz);
    fmul(line->im, line->im, yq);
  }
  fsqr(x3, m);
  fsub(x3, x3, s);
  fsub(x3, x3, s);
  fsub(tmp, s, x3);
  fmul(tmp, m, tmp);
  fdbl(yyyy, yyyy);
  fdbl(yyyy, yyyy);
  fdbl(yyyy, yyyy);
  fsub(t.Y, tmp, yyyy);
  mpz_swap(t.X, x3);
  mpz_swap(t.Z, z3);
}

// T <- T + P for affine P. Returns false when the chord is vertical (T == -P);
// the line is then an F_q value and is not reported.
bool jac_add_affine(Jac& t, mpz_srcptr xp, mpz_srcptr yp, Line* line, mpz_srcptr xq,
                    mpz_srcptr yq) {
  if (t.inf) {
    set_affine(t, xp, yp);
    return false;
  }
  Fe zz, u2, s2, h, r, hh, hhh, v, x3, tmp;
  fsqr(zz, t.Z);
  fmul(u2, xp, zz);
  fmul(s2, yp, t.Z);
  fmul(s2, s2, zz);
  fsub(h, u2, t.X);
  fsub(r, s2, t.Y);
  if (sgn(h) == 0) {
    if (sgn(r) == 0) {
      jac_double(t, line, xq, yq);
      return line != nullptr;
    }
    t.inf = true;
    return false;
  }
  fsqr(hh, h);
  fmul(hhh, h, hh);
  fmul(v, t.X, hh);
  fsqr(x3, r);
  fsub(x3, x3, hhh);
  fsub(x3, x3, v);
  fsub(x3, x3, v);
  fsub(tmp, v, x3);
  fmul(tmp, r, tmp);
  fmul(hhh, t.Y, hhh);
  fsub(t.Y, tmp, hhh);
  fmul(t.Z, t.Z, h);
  mpz_swap(t.X, x3);
  if (line) {
    fadd(tmp, xq, xp);
    fmul(line->re, r, tmp);
    fmul(tmp, yp, t.Z);
    fsub(line->re, line->re, tmp);
    fmul(line->im, yq, t.Z);
  }
  return true;
}

void to_affine(const Jac& j, mpz_class& x, mpz_class& y, bool& inf) {
  if (j.inf) {
    inf = true;
    x = 0;
    y = 0;
    return;
  }
  Fe zi, zi2, tmp;
  finv(zi, j.Z);
  fsqr(zi2, zi);
  fmul(tmp, j.X, zi2);
  x = mpz_class(static_cast<mpz_srcptr>(tmp));
  fmul(zi2, zi2, zi);
  fmul(tmp, j.Y, zi2);
  y = mpz_class(static_cast<mpz_srcptr>(tmp));
  inf = false;
}

// F_q^2 arithmetic on (a, b) = a + b*i.
struct Fq2Work {
  Fe a, b;
};

void load(Fq2Work& w, const Fq2& v) {
  mpz_set(w.a, v.a.get_mpz_t());
  mpz_set(w.b, v.b.get_mpz_t());
}
Fq2 store(const Fq2Work& w) {
  return Fq2{mpz_class(static_cast<mpz_srcptr>(w.a)), mpz_class(static_cast<mpz_srcptr>(w.b))};
}

// w <- w * (c + d*i)
void fq2_mul(Fq2Work& w, mpz_srcptr c, mpz_srcptr d) {
  Fe ac, bd, s, t;
  fmul(ac, w.a, c);
  fmul(bd, w.b, d);
  fadd(s, w.a, w.b);
  fadd(t, c, d);
  fmul(s, s, t);
  fsub(s, s, ac);
  fsub(w.b, s, bd);
  fsub(w.a, ac, bd);
}

// w <- w^2
void fq2_sqr(Fq2Work& w) {
  Fe s, d, ab;
  fadd(s, w.a, w.b);
  fsub(d, w.a, w.b);
  fmul(ab, w.a, w.b);
  fmul(w.a, s, d);
  fdbl(w.b, ab);
}

// w <- w^2 for a + b*i of norm one.
void fq2_sqr_unitary(Fq2Work& w) {
  Fe aa, ab;
  fsqr(aa, w.a);
  fmul(ab, w.a, w.b);
  fdbl(w.a, aa);
  if (sgn(w.a) == 0) mpz_set(w.a, Q());
  mpz_sub_ui(w.a, w.a, 1);
  fdbl(w.b, ab);
}

Fq2 fq2_pow(const Fq2& base, const mpz_class& e, bool unitary) {
  Fq2Work acc;
  mpz_set_ui(acc.a, 1);
  mpz_set_ui(acc.b, 0);
  if (e == 0) return store(acc);
  Fe ba(base.a.get_mpz_t()), bb(base.b.get_mpz_t());
  for (long i = static_cast<long>(mpz_sizeinbase(e.get_mpz_t(), 2)) - 1; i >= 0; --i) {
    if (unitary) fq2_sqr_unitary(acc); else fq2_sqr(acc);
    if (mpz_tstbit(e.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) fq2_mul(acc, ba, bb);
  }
  return store(acc);
}

Fq2 fq2_mul(const Fq2& x, const Fq2& y) {
  Fq2Work w;
  load(w, x);
  Fe c(y.a.get_mpz_t()), d(y.b.get_mpz_t());
  fq2_mul(w, c, d);
  return store(w);
}

Fq2 fq2_conj(const Fq2& x) {
  Fq2 out = x;
  if (out.b != 0) out.b = curve().q - out.b;
  return out;
}

void export_field(const mpz_class& v, std::uint8_t* out) {
  std::fill(out, out + kFieldBytes, 0);
  std::size_t count = 0;
  std::uint8_t tmp[kFieldBytes];
  mpz_export(tmp, &count, 1, 1, 1, 0, v.get_mpz_t());
  std::copy(tmp, tmp + count, out + (kFieldBytes - count));
}

mpz_class import_field(const std::uint8_t* in) {
  mpz_class v;
  mpz_import(v.get_mpz_t(), kFieldBytes, 1, 1, 1, 0, in);
  if (v >= curve().q) throw FormatError("field element not reduced");
  return v;
}

// generator() * (digit * 16^window) for every window and non-zero digit.
struct GeneratorTable {
  static constexpr int kWindows = 40;
  std::vector<G1> entries;  // [window * 16 + digit]
};

}  // namespace

const CurveParams& curve() {
  static const CurveParams params{mpz_class(kQ), mpz_class(kR), mpz_class(kH)};
  return params;
}

// ---------------------------------------------------------------------------
// Zr

Zr::Zr(std::uint64_t v) {
  mpz_import(v_.get_mpz_t(), 1, 1, sizeof v, 0, 0, &v);
  v_ %= curve().r;
}

Zr Zr::from_mpz(const mpz_class& v) {
  Zr z;
  mpz_fdiv_r(z.v_.get_mpz_t(), v.get_mpz_t(), curve().r.get_mpz_t());
  return z;
}

Zr Zr::random(Rng& rng) {
  // 256 random bits reduced mod a 160-bit prime: bias below 2^-96.
  std::uint8_t buf[32];
  rng.fill(buf);
  mpz_class v;
  mpz_import(v.get_mpz_t(), sizeof buf, 1, 1, 1, 0, buf);
  return from_mpz(v);
}

Zr Zr::random_nonzero(Rng& rng) {
  for (;;) {
    Zr z = random(rng);
    if (!z.is_zero()) return z;
  }
}

Zr Zr::inverse() const {
  if (is_zero()) throw std::domain_error("inverse of zero in Z_r");
  Zr z;
  mpz_invert(z.v_.get_mpz_t(), v_.get_mpz_t(), curve().r.get_mpz_t());
  return z;
}

Zr operator+(const Zr& a, const Zr& b) { return Zr::from_mpz(a.v_ + b.v_); }
Zr operator-(const Zr& a, const Zr& b) { return Zr::from_mpz(a.v_ - b.v_); }
Zr operator*(const Zr& a, const Zr& b) { return Zr::from_mpz(a.v_ * b.v_); }
Zr Zr::operator-() const { return from_mpz(-v_); }

std::array<std::uint8_t, kZrBytes> Zr::to_bytes() const {
  std::array<std::uint8_t, kZrBytes> out{};
  std::size_t count = 0;
  std::uint8_t tmp[kZrBytes];
  mpz_export(tmp, &count, 1, 1, 1, 0, v_.get_mpz_t());
  std::copy(tmp, tmp + count, out.data() + (kZrBytes - count));
  return out;
}

Zr Zr::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kZrBytes) throw FormatError("Zr encoding must be 20 bytes");
  Zr z;
  mpz_import(z.v_.get_mpz_t(), kZrBytes, 1, 1, 1, 0, bytes.data());
  if (z.v_ >= curve().r) throw FormatError("Zr encoding not reduced");
  return z;
}

// ---------------------------------------------------------------------------
// G1

class PointOps {
 public:
  static G1 make(mpz_class x, mpz_class y) {
    G1 p;
    p.x_ = std::move(x);
    p.y_ = std::move(y);
    p.infinity_ = false;
    return p;
  }
  static G1 from_jac(const Jac& j) {
    G1 p;
    to_affine(j, p.x_, p.y_, p.infinity_);
    return p;
  }
  static const GeneratorTable& table() {
    static const GeneratorTable t = [] {
      GeneratorTable table;
      table.entries.resize(GeneratorTable::kWindows * 16);
      G1 base = G1::generator();
      for (int w = 0; w < GeneratorTable::kWindows; ++w) {
        G1 acc;
        for (int d = 1; d < 16; ++d) {
          acc = acc + base;
          table.entries[w * 16 + d] = acc;
        }
        base = acc + base;  // 16 * base
      }
      return table;
    }();
    return t;
  }
};

const G1& G1::generator() {
  static const G1 g = [] {
    const CurveParams& c = curve();
    const mpz_class exp = (c.q + 1) / 4;
    for (unsigned long x0 = 1;; ++x0) {
      mpz_class x = x0;
      mpz_class rhs = (x * x * x + x) % c.q;
      mpz_class y;
      mpz_powm(y.get_mpz_t(), rhs.get_mpz_t(), exp.get_mpz_t(), c.q.get_mpz_t());
      if ((y * y) % c.q != rhs) continue;
      G1 p = PointOps::make(x, y);
      // Clear the cofactor with plain double-and-add (Zr would reduce h mod r).
      Jac acc;
      for (long i = static_cast<long>(mpz_sizeinbase(c.h.get_mpz_t(), 2)) - 1; i >= 0; --i) {
        jac_double(acc, nullptr, nullptr, nullptr);
        if (mpz_tstbit(c.h.get_mpz_t(), static_cast<mp_bitcnt_t>(i)))
          jac_add_affine(acc, p.x().get_mpz_t(), p.y().get_mpz_t(), nullptr, nullptr, nullptr);
      }
      G1 g = PointOps::from_jac(acc);
      if (!g.is_identity()) return g;
    }
  }();
  return g;
}

G1 operator+(const G1& a, const G1& b) {
  if (a.infinity_) return b;
  if (b.infinity_) return a;
  const mpz_class& q = curve().q;
  mpz_class lambda;
  if (a.x_ == b.x_) {
    if (a.y_ != b.y_ || a.y_ == 0) return G1{};
    mpz_class num = (3 * a.x_ * a.x_ + 1) % q;
    mpz_class den = (2 * a.y_) % q;
    mpz_invert(den.get_mpz_t(), den.get_mpz_t(), q.get_mpz_t());
    lambda = (num * den) % q;
  } else {
    mpz_class num = b.y_ - a.y_;
    mpz_class den = b.x_ - a.x_;
    mpz_fdiv_r(den.get_mpz_t(), den.get_mpz_t(), q.get_mpz_t());
    mpz_invert(den.get_mpz_t(), den.get_mpz_t(), q.get_mpz_t());
    lambda = num * den;
    mpz_fdiv_r(lambda.get_mpz_t(), lambda.get_mpz_t(), q.get_mpz_t());
  }
  mpz_class x3 = lambda * lambda - a.x_ - b.x_;
  mpz_fdiv_r(x3.get_mpz_t(), x3.get_mpz_t(), q.get_mpz_t());
  mpz_class y3 = lambda * (a.x_ - x3) - a.y_;
  mpz_fdiv_r(y3.get_mpz_t(), y3.get_mpz_t(), q.get_mpz_t());
  return PointOps::make(std::move(x3), std::move(y3));
}

G1 G1::operator-() const {
  if (infinity_ || y_ == 0) return *this;
  return PointOps::make(x_, curve().q - y_);
}

G1 operator*(const G1& p, const Zr& k) {
  if (p.infinity_ || k.is_zero()) return G1{};
  Jac acc;
  const mpz_srcptr e = k.value().get_mpz_t();
  const mpz_srcptr px = p.x_.get_mpz_t();
  const mpz_srcptr py = p.y_.get_mpz_t();
  for (long i = static_cast<long>(mpz_sizeinbase(e, 2)) - 1; i >= 0; --i) {
    jac_double(acc, nullptr, nullptr, nullptr);
    if (mpz_tstbit(e, static_cast<mp_bitcnt_t>(i)))
      jac_add_affine(acc, px, py, nullptr, nullptr, nullptr);
  }
  return PointOps::from_jac(acc);
}

G1 G1::mul_generator(const Zr& k) {
  const GeneratorTable& table = PointOps::table();
  const mpz_srcptr e = k.value().get_mpz_t();
  Jac acc;
  for (int w = 0; w < GeneratorTable::kWindows; ++w) {
    unsigned digit = 0;
    for (int b = 0; b < 4; ++b)
      digit |= static_cast<unsigned>(mpz_tstbit(e, static_cast<mp_bitcnt_t>(4 * w + b))) << b;
    if (digit == 0) continue;
    const G1& entry = table.entries[w * 16 + digit];
    jac_add_affine(acc, entry.x_.get_mpz_t(), entry.y_.get_mpz_t(), nullptr, nullptr, nullptr);
  }
  return PointOps::from_jac(acc);
}

bool operator==(const G1& a, const G1& b) {
  if (a.infinity_ || b.infinity_) return a.infinity_ == b.infinity_;
  return a.x_ == b.x_ && a.y_ == b.y_;
}

bool G1::on_curve() const {
  if (infinity_) return true;
  const mpz_class& q = curve().q;
  return (y_ * y_) % q == (x_ * x_ * x_ + x_) % q;
}

std::array<std::uint8_t, kG1Bytes> G1::to_bytes() const {
  std::array<std::uint8_t, kG1Bytes> out{};
  if (infinity_) return out;
  export_field(x_, out.data());
  export_field(y_, out.data() + kFieldBytes);
  return out;
}

G1 G1::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kG1Bytes) throw FormatError("G1 encoding must be 128 bytes");
  bool all_zero = true;
  for (auto b : bytes) all_zero = all_zero && b == 0;
  if (all_zero) return G1{};
  G1 p = PointOps::make(import_field(bytes.data()), import_field(bytes.data() + kFieldBytes));
  if (!p.on_curve()) throw FormatError("G1 point not on curve");
  // r * P must vanish; r reduces to zero in Zr, so multiply by r - 1 and add P.
  if (!(p * Zr::from_mpz(curve().r - 1) + p).is_identity())
    throw FormatError("G1 point outside the order-r subgroup");
  return p;
}

// ---------------------------------------------------------------------------
// GT and the pairing

const GT& GT::generator() {
  static const GT egg = pair(G1::generator(), G1::generator());
  return egg;
}

GT operator*(const GT& a, const GT& b) { return GT(fq2_mul(a.v_, b.v_)); }
GT GT::inverse() const { return GT(fq2_conj(v_)); }
GT operator/(const GT& a, const GT& b) { return a * b.inverse(); }
GT GT::pow(const Zr& k) const { return GT(fq2_pow(v_, k.value(), true)); }

std::array<std::uint8_t, kGtBytes> GT::to_bytes() const {
  std::array<std::uint8_t, kGtBytes> out{};
  export_field(v_.a, out.data());
  export_field(v_.b, out.data() + kFieldBytes);
  return out;
}

GT GT::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kGtBytes) throw FormatError("GT encoding must be 128 bytes");
  Fq2 v{import_field(bytes.data()), import_field(bytes.data() + kFieldBytes)};
  const mpz_class& q = curve().q;
  if ((v.a * v.a + v.b * v.b) % q != 1) throw FormatError("GT element has norm != 1");
  Fq2 check = fq2_pow(v, curve().r, true);
  if (!(check.a == 1 && check.b == 0)) throw FormatError("GT element outside the order-r subgroup");
  return GT(std::move(v));
}

MillerValue operator*(const MillerValue& a, const MillerValue& b) {
  return MillerValue(fq2_mul(a.v_, b.v_));
}

MillerValue MillerValue::pow(const Zr& k) const { return MillerValue(fq2_pow(v_, k.value(), false)); }

GT MillerValue::finalize() const {
  // f^((q^2 - 1) / r) = (conj(f) / f)^h, and conj(f) / f = conj(f)^2 / N(f).
  Fq2Work w;
  load(w, v_);
  Fe norm, aa, bb, t;
  fsqr(aa, w.a);
  fsqr(bb, w.b);
  fadd(norm, aa, bb);
  finv(norm, norm);
  fmul(t, w.a, w.b);
  fdbl(t, t);
  fneg(t, t);
  fsub(w.a, aa, bb);
  fmul(w.a, w.a, norm);
  fmul(w.b, t, norm);
  return GT(fq2_pow(store(w), curve().h, true));
}

MillerValue miller_loop(const G1& p, const G1& q) {
  if (p.is_identity() || q.is_identity()) return MillerValue{};
  const mpz_srcptr xp = p.x().get_mpz_t();
  const mpz_srcptr yp = p.y().get_mpz_t();
  const mpz_srcptr xq = q.x().get_mpz_t();
  const mpz_srcptr yq = q.y().get_mpz_t();
  const mpz_srcptr r = curve().r.get_mpz_t();

  Jac t;
  set_affine(t, xp, yp);
  Fq2Work f;
  mpz_set_ui(f.a, 1);
  mpz_set_ui(f.b, 0);
  Line line;
  for (long i = static_cast<long>(mpz_sizeinbase(r, 2)) - 2; i >= 0; --i) {
    fq2_sqr(f);
    jac_double(t, &line, xq, yq);
    fq2_mul(f, line.re, line.im);
    if (mpz_tstbit(r, static_cast<mp_bitcnt_t>(i))) {
      if (jac_add_affine(t, xp, yp, &line, xq, yq)) fq2_mul(f, line.re, line.im);
    }
  }
  return MillerValue(store(f));
}

GT pair(const G1& p, const G1& q) { return miller_loop(p, q).finalize(); }

}  // namespace abe_cities::pairing
