"""Deterministic synthetic playpage corpora.

Every page belongs to one topic and is either relevant or not for queries
on that topic. Relevant and non-relevant pages of a topic draw their text
from the same distribution; only their playnum and the links they attract
differ. That lets experiments check whether popularity and link signals
recover relevance that the text alone cannot.

Output layout (ingestible by :func:`pavideoge.corpus.ingest_corpus`)::

    pages/<key>.html
    fixtures/manifest.tsv, fixtures/player/<id>.xml, fixtures/playnum/<id>.txt
    queries/train.tsv, queries/test.tsv, queries/groups.tsv, queries/qrels.tsv
    site.profile, gen.spec
"""

from __future__ import annotations

import math
import os
import random
import shutil
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import InvalidSpec, OutputExists

MARKER = ".pavideoge-corpus"
SITE = "http://www.tudou.com"
_KEY_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-"
_SYLLABLES = ["ba", "ko", "mi", "ru", "ta", "ne", "so", "li", "va", "de", "zu", "po", "fa", "gi", "he", "ju", "xo", "ye"]

SITE_PROFILE = r"""# generated tudou-like site profile
site_name=tudou-like
playpage_url_pattern=^https?://www\.tudou\.com/programs/view/[A-Za-z0-9_-]+/?$
video_id_pattern=var iid = (\d+)
player_endpoint_template=http://www.tudou.com/player/v.php?id={id}
playnum_endpoint_template=http://www.tudou.com/programs/view_ajax.php?itemID={id}
real_link_pattern=(https?://[^\s<>"]+\.flv)
playnum_pattern=playNum:'([^']*)'
region.title=<title>(.*?)</title>
region.tags=<meta name="Keywords" content="([^"]*)"
region.description=<meta name="Description" content="([^"]*)"
region.related_titles=<a class="rel" href="[^"]*">(.*?)</a>
region.comments=<p class="cmt">(.*?)</p>
"""

_PAGE = """<!DOCTYPE html PUBLIC "-//W3C//DTD XHTML 1.0 Transitional//EN" "http://www.w3.org/TR/xhtml1/DTD/xhtml1-transitional.dtd">
<html xmlns="http://www.w3.org/1999/xhtml" xml:lang="zh-CN" dir="ltr">
<head>
  <meta http-equiv="Content-Type" content="text/html; charset=UTF-8"/>
  <title>{title}</title>
  <meta name="Keywords" content="{tags}" />
  <meta name="Description" content="{description}"/>
  <link rel="canonical" href="{url}"/>
  <script type="text/javascript">
  document.domain = "tudou.com";
  var iid = {video_id}
  , flu_code = {key}
  , cid = 1
  </script>
</head>
<body>
<div class="ad"><a href="http://ad.example.com/click?slot={slot}"><img src="http://img.tudou.com/ad/{slot}.jpg"/></a></div>
<a href="/home/user{uploader}/">uploader</a>
<a href="http://img.tudou.com/thumb/{video_id}.jpg">cover</a>
<div class="related">
{related}
</div>
<div class="comments">
{comments}
</div>
</body>
</html>
"""


@dataclass(frozen=True)
class GenSpec:
    n: int = 400
    vocab_size: int = 800
    vocabulary: tuple[str, ...] = ()
    script: str = "latin"
    topics: int = 20
    words_per_topic: int = 6
    relevant_fraction: float = 0.4
    playnum_median: float = 500.0
    playnum_sigma: float = 0.8
    relevant_playnum_boost: float = 6.0
    link_density: int = 6
    same_topic_link_prob: float = 0.8
    relevant_link_bias: float = 4.0
    external_link_prob: float = 0.2
    topic_word_rate: float = 0.3
    cross_topic_noise: float = 0.3
    max_comments: int = 3
    train_queries: int = 60
    groups: int = 6
    queries_per_group: int = 50
    query_terms: int = 2

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidSpec(f"n must be >= 1, got {self.n}")
        if not self.vocabulary and self.vocab_size < 1:
            raise InvalidSpec("vocabulary is empty")
        if self.script not in ("latin", "cjk"):
            raise InvalidSpec(f"script must be latin or cjk, got {self.script!r}")
        if self.topics < 1 or self.words_per_topic < 1:
            raise InvalidSpec("topics and words_per_topic must be >= 1")
        for name in ("relevant_fraction", "same_topic_link_prob", "external_link_prob",
                     "topic_word_rate", "cross_topic_noise"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidSpec(f"{name} must lie in [0, 1]")
        if self.link_density < 0 or self.max_comments < 0 or self.query_terms < 1:
            raise InvalidSpec("link_density and max_comments must be >= 0, query_terms >= 1")

    def dumps(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, (tuple, list)):
                if not v:
                    continue  # empty vocabulary means "generated"
                v = ",".join(v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"


def parse_gen_spec(text: str) -> GenSpec:
    types = {f.name: f.type for f in fields(GenSpec)}
    kwargs: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep or key not in types:
            raise InvalidSpec(f"line {lineno}: unknown or malformed entry {line!r}")
        t = types[key]
        try:
            if key == "vocabulary":
                kwargs[key] = tuple(w.strip() for w in value.split(",") if w.strip())
                if not kwargs[key]:
                    raise InvalidSpec("vocabulary is empty")
            elif t == "int":
                kwargs[key] = int(value)
            elif t == "float":
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError:
            raise InvalidSpec(f"line {lineno}: bad value for {key}: {value!r}") from None
    return GenSpec(**kwargs)


def load_gen_spec(path: str | os.PathLike) -> GenSpec:
    return parse_gen_spec(Path(path).read_text(encoding="utf-8"))


def _make_vocab(spec: GenSpec, rng: random.Random) -> list[str]:
    if spec.vocabulary:
        return list(dict.fromkeys(spec.vocabulary))
    words: set[str] = set()
    while len(words) < spec.vocab_size:
        if spec.script == "cjk":
            w = "".join(chr(rng.randint(0x4E00, 0x9FA5)) for _ in range(2))
        else:
            w = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))
        words.add(w)
    return sorted(words)


def _keys(n: int, rng: random.Random) -> list[str]:
    keys: set[str] = set()
    while len(keys) < n:
        keys.add("".join(rng.choice(_KEY_ALPHABET) for _ in range(11)))
    return sorted(keys)


def _playpage_url(key: str) -> str:
    return f"{SITE}/programs/view/{key}/"


def _real_link(video_id: int, rng: random.Random) -> str:
    padded = str(video_id).zfill(9)
    return f"http://player{rng.randint(1, 99):04d}.tudou.com/flv/{padded[:6]}/{padded[6:]}/{video_id}.flv"


def _weighted_sample(rng: random.Random, pool: list[int], weights: list[float], k: int) -> list[int]:
    # Efraimidis-Spirakis keys give a weighted sample without replacement
    keyed = sorted(pool, key=lambda i: -(rng.random() ** (1.0 / weights[i])))
    return keyed[:k]


@dataclass
class _Doc:
    key: str
    video_id: int
    topic: int
    relevant: bool
    playnum: int
    title: str = ""
    tags: tuple[str, ...] = ()
    description: str = ""
    comments: tuple[str, ...] = ()
    links: tuple[int, ...] = ()


def _simulate(spec: GenSpec, seed: int):
    rng = random.Random(seed)
    vocab = _make_vocab(spec, rng)
    n_topics = min(spec.topics, spec.n)
    per_topic = min(spec.words_per_topic, len(vocab))
    topic_words = [rng.sample(vocab, per_topic) for _ in range(n_topics)]
    topical = {w for ws in topic_words for w in ws}
    background = [w for w in vocab if w not in topical] or vocab

    keys = _keys(spec.n, rng)
    rng.shuffle(keys)
    video_ids = rng.sample(range(10_000_000, 99_999_999), spec.n)
    docs = []
    for i in range(spec.n):
        topic = i % n_topics
        relevant = rng.random() < spec.relevant_fraction
        plays = spec.playnum_median * math.exp(spec.playnum_sigma * rng.gauss(0.0, 1.0))
        if relevant:
            plays *= spec.relevant_playnum_boost
        docs.append(_Doc(keys[i], video_ids[i], topic, relevant, int(round(plays))))

    def words(topic: int, count: int, rate: float) -> list[str]:
        out = []
        for _ in range(count):
            if rng.random() < rate:
                out.append(rng.choice(topic_words[topic]))
            elif n_topics > 1 and rng.random() < spec.cross_topic_noise * rate:
                out.append(rng.choice(topic_words[rng.randrange(n_topics)]))
            else:
                out.append(rng.choice(background))
        return out

    for doc in docs:
        t = doc.topic
        doc.title = " ".join([rng.choice(topic_words[t])] + words(t, 2, 0.0))
        tags = rng.sample(topic_words[t], min(2, per_topic))
        if n_topics > 1 and rng.random() < spec.cross_topic_noise:
            tags.append(rng.choice(topic_words[rng.randrange(n_topics)]))
        doc.tags = tuple(dict.fromkeys(tags))
        doc.description = " ".join(words(t, 6, spec.topic_word_rate))
        doc.comments = tuple(
            " ".join(words(t, 5, spec.topic_word_rate / 2)) for _ in range(rng.randint(0, spec.max_comments))
        )

    by_topic = [[i for i, d in enumerate(docs) if d.topic == t] for t in range(n_topics)]
    weights = [spec.relevant_link_bias if d.relevant else 1.0 for d in docs]
    weights = [max(w, 1e-9) for w in weights]
    everyone = list(range(spec.n))
    for i, doc in enumerate(docs):
        if spec.n == 1 or spec.link_density == 0:
            continue
        want = rng.randint(max(1, spec.link_density // 2), spec.link_density + spec.link_density // 2)
        pool = by_topic[doc.topic] if rng.random() < spec.same_topic_link_prob else everyone
        pool = [j for j in pool if j != i] or [j for j in everyone if j != i]
        doc.links = tuple(_weighted_sample(rng, pool, weights, min(want, len(pool))))
    return rng, vocab, topic_words, docs


def _render_page(doc: _Doc, docs: list[_Doc], rng: random.Random, spec: GenSpec) -> str:
    related = []
    for j in doc.links:
        other = docs[j]
        related.append(f'<a class="rel" href="{_playpage_url(other.key)}">{other.title}</a>')
    if doc.links and rng.random() < 0.2:
        # repeated anchor to an already-linked page
        other = docs[doc.links[0]]
        related.append(f'<a class="more" href="{_playpage_url(other.key)}">more</a>')
    if rng.random() < spec.external_link_prob:
        ext = "".join(rng.choice(_KEY_ALPHABET) for _ in range(10)) + "_"
        related.append(f'<a class="ext" href="{_playpage_url(ext)}">elsewhere</a>')
    comments = "\n".join(f'<p class="cmt">{c}</p>' for c in doc.comments)
    return _PAGE.format(
        title=f"{doc.title} - 视频 - 在线观看",
        tags=",".join(doc.tags),
        description=doc.description,
        url=_playpage_url(doc.key),
        video_id=doc.video_id,
        key=doc.key,
        slot=rng.randint(1, 9999),
        uploader=rng.randint(1, 99999),
        related="\n".join(related),
        comments=comments,
    )


def _queries(spec, rng, topic_words, docs):
    n_topics = len(topic_words)

    def one(qid: str):
        t = rng.randrange(n_topics)
        terms = rng.sample(topic_words[t], min(spec.query_terms, len(topic_words[t])))
        return qid, t, " ".join(terms)

    train = [one(f"T{i:03d}") for i in range(1, spec.train_queries + 1)]
    test, groups = [], []
    for g in range(1, spec.groups + 1):
        for i in range(1, spec.queries_per_group + 1):
            q = one(f"G{g}Q{i:03d}")
            test.append(q)
            groups.append((q[0], str(g)))
    qrels = []
    for qid, t, _ in train + test:
        for d in sorted((d for d in docs if d.topic == t), key=lambda d: d.key):
            qrels.append((qid, d.key, 1 if d.relevant else 0))
    return train, test, groups, qrels


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))


def generate_synthetic_corpus(spec: GenSpec, seed: int, out: str | os.PathLike) -> Path:
    """Write a corpus to ``out``. Same (spec, seed) gives byte-identical files.

    An existing ``out`` is replaced only if it is an earlier generated corpus
    (it carries the marker file); any other non-empty directory is refused.
    """
    out = Path(out)
    if out.exists() and any(out.iterdir()) and not (out / MARKER).exists():
        raise OutputExists(f"{out} exists and is not a generated corpus")
    rng, _, topic_words, docs = _simulate(spec, seed)

    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        manifest = []
        for doc in sorted(docs, key=lambda d: d.key):
            _write(tmp / "pages" / f"{doc.key}.html", _render_page(doc, docs, rng, spec))
            player = f"player/{doc.video_id}.xml"
            playnum = f"playnum/{doc.video_id}.txt"
            _write(
                tmp / "fixtures" / player,
                f'<v c="{rng.randint(1_000_000, 9_999_999)}" dWidthLimit="0" logoPosition="0">\n'
                f'  <w="10" {_real_link(doc.video_id, rng)}\n  </v>\n',
            )
            _write(
                tmp / "fixtures" / playnum,
                f"((digNum:'{rng.randint(0, 500)}' playNum:'{doc.playnum}' commentNum:'{len(doc.comments)}',"
                "commentTm:'0',w:'0',m:'0',favor:'0'))\n",
            )
            manifest.append(f"{SITE}/player/v.php?id={doc.video_id}\t{player}")
            manifest.append(f"{SITE}/programs/view_ajax.php?itemID={doc.video_id}\t{playnum}")
        _write(tmp / "fixtures" / "manifest.tsv", "".join(m + "\n" for m in manifest))

        train, test, groups, qrels = _queries(spec, rng, topic_words, docs)
        _write(tmp / "queries" / "train.tsv", "".join(f"{q}\t{text}\n" for q, _, text in train))
        _write(tmp / "queries" / "test.tsv", "".join(f"{q}\t{text}\n" for q, _, text in test))
        _write(tmp / "queries" / "groups.tsv", "".join(f"{q}\t{g}\n" for q, g in groups))
        _write(tmp / "queries" / "qrels.tsv", "".join(f"{q}\t{d}\t{r}\n" for q, d, r in qrels))
        _write(tmp / "site.profile", SITE_PROFILE)
        _write(tmp / "gen.spec", f"# seed={seed}\n" + spec.dumps())
        _write(tmp / MARKER, "")
        tmp.chmod(0o755)
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out
