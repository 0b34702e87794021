"""Naive double-loop reference implementations used as metric oracles.

Everything here is deliberately slow, pure-Python, and written directly from
the metric definitions; it shares no code with the shipped implementations.
"""

import math


def as_rows(plane):
    return [[float(v) for v in row] for row in plane.pixels]


def ref_mse(a, b):
    rows_a, rows_b = as_rows(a), as_rows(b)
    total = 0.0
    n = 0
    for ra, rb in zip(rows_a, rows_b):
        for va, vb in zip(ra, rb):
            total += (va - vb) ** 2
            n += 1
    return total / n


def ref_psnr(a, b):
    err = ref_mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(a.range_r * a.range_r / err)


def ref_gaussian_kernel(size, sigma):
    c = size // 2
    k = [
        [
            math.exp(-((i - c) ** 2) / (2 * sigma * sigma))
            * math.exp(-((j - c) ** 2) / (2 * sigma * sigma))
            for j in range(size)
        ]
        for i in range(size)
    ]
    total = sum(sum(row) for row in k)
    return [[v / total for v in row] for row in k]


def _window_moments(xs, ys, kernel, top, left):
    size = len(kernel)
    mu_x = mu_y = 0.0
    for i in range(size):
        for j in range(size):
            w = kernel[i][j]
            mu_x += w * xs[top + i][left + j]
            mu_y += w * ys[top + i][left + j]
    var_x = var_y = cov = 0.0
    for i in range(size):
        for j in range(size):
            w = kernel[i][j]
            dx = xs[top + i][left + j] - mu_x
            dy = ys[top + i][left + j] - mu_y
            var_x += w * dx * dx
            var_y += w * dy * dy
            cov += w * dx * dy
    return mu_x, mu_y, var_x, var_y, cov


def ref_ssim(a, b, window_size=11, sigma=1.5, k1=0.01, k2=0.03):
    xs, ys = as_rows(a), as_rows(b)
    kernel = ref_gaussian_kernel(window_size, sigma)
    c1 = (k1 * a.range_r) ** 2
    c2 = (k2 * a.range_r) ** 2
    h, w = len(xs), len(xs[0])
    total = 0.0
    count = 0
    for top in range(h - window_size + 1):
        for left in range(w - window_size + 1):
            mu_x, mu_y, var_x, var_y, cov = _window_moments(xs, ys, kernel, top, left)
            total += ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
                (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
            )
            count += 1
    return total / count


def ref_uqi(a, b, window=8):
    xs, ys = as_rows(a), as_rows(b)
    kernel = [[1.0 / (window * window)] * window for _ in range(window)]
    h, w = len(xs), len(xs[0])
    total = 0.0
    count = 0
    for top in range(h - window + 1):
        for left in range(w - window + 1):
            mu_x, mu_y, var_x, var_y, cov = _window_moments(xs, ys, kernel, top, left)
            if var_x == 0.0 and var_y == 0.0:
                score = 1.0 if mu_x == mu_y else 2 * mu_x * mu_y / (mu_x**2 + mu_y**2)
            elif var_x == 0.0 or var_y == 0.0:
                score = 0.0
            else:
                sx, sy = math.sqrt(var_x), math.sqrt(var_y)
                score = (
                    (cov / (sx * sy))
                    * (2 * mu_x * mu_y / (mu_x**2 + mu_y**2))
                    * (2 * sx * sy / (var_x + var_y))
                )
            total += score
            count += 1
    return total / count


def _sym_index(i, n):
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        if i >= n:
            i = 2 * n - 1 - i
    return i


def _filter_same_rows(rows, kernel):
    h, w = len(rows), len(rows[0])
    size = len(kernel)
    r = size // 2
    out = [[0.0] * w for _ in range(h)]
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di in range(size):
                for dj in range(size):
                    ii = _sym_index(i + di - r, h)
                    jj = _sym_index(j + dj - r, w)
                    acc += kernel[di][dj] * rows[ii][jj]
            out[i][j] = acc
    return out


def _decimate(rows):
    return [row[::2] for row in rows[::2]]


def ref_vif(a, b, num_scales=4, noise_variance=2.0, eps=1e-10):
    xs, ys = as_rows(a), as_rows(b)
    num = 0.0
    den = 0.0
    for s in range(1, num_scales + 1):
        sigma = s / 5.0
        size = 2 * math.ceil(3.0 * sigma) + 1
        kernel = ref_gaussian_kernel(size, sigma)
        if s > 1:
            xs = _decimate(_filter_same_rows(xs, kernel))
            ys = _decimate(_filter_same_rows(ys, kernel))
        h, w = len(xs), len(xs[0])
        r = size // 2
        for i in range(h):
            for j in range(w):
                mu_x = mu_y = 0.0
                for di in range(size):
                    for dj in range(size):
                        ii = _sym_index(i + di - r, h)
                        jj = _sym_index(j + dj - r, w)
                        wgt = kernel[di][dj]
                        mu_x += wgt * xs[ii][jj]
                        mu_y += wgt * ys[ii][jj]
                var_x = var_y = cov = 0.0
                for di in range(size):
                    for dj in range(size):
                        ii = _sym_index(i + di - r, h)
                        jj = _sym_index(j + dj - r, w)
                        wgt = kernel[di][dj]
                        dx = xs[ii][jj] - mu_x
                        dy = ys[ii][jj] - mu_y
                        var_x += wgt * dx * dx
                        var_y += wgt * dy * dy
                        cov += wgt * dx * dy
                g = cov / (var_x + eps)
                if g < 0.0:
                    g = 0.0
                sv_sq = var_y - g * cov
                if sv_sq < 0.0:
                    sv_sq = 0.0
                num += math.log2(1.0 + g * g * var_x / (sv_sq + noise_variance))
                den += math.log2(1.0 + var_x / noise_variance)
    return num / den


def ref_silhouette(points, labels):
    """Brute-force mean silhouette with Euclidean distances."""
    n = len(points)

    def dist(p, q):
        return math.sqrt(sum((pv - qv) ** 2 for pv, qv in zip(p, q)))

    classes = sorted(set(labels))
    scores = []
    for i in range(n):
        same = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not same:
            scores.append(0.0)
            continue
        a = sum(dist(points[i], points[j]) for j in same) / len(same)
        b = min(
            sum(dist(points[i], points[j]) for j in range(n) if labels[j] == other)
            / sum(1 for j in range(n) if labels[j] == other)
            for other in classes
            if other != labels[i]
        )
        denom = max(a, b)
        scores.append(0.0 if denom == 0.0 else (b - a) / denom)
    return sum(scores) / n
