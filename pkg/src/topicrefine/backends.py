"""Clients for the chat LLM and embedding services.

Two implementations per service: an HTTP client (with disk cache, retry,
backoff) and a read-only fixture backend that replays recorded responses,
used for tests and deterministic runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    MissingEmbeddingError,
    SchemaError,
    TimeoutError_,
    TransportError,
)

ENGLISH_PROMPT = """You are a healthcare expert tasked with analyzing patient feedback. Your task is to:
1. Sentiment Analysis: Assign a relevant sentiment to each comment in the list of patient feedback provided. The sentiment can be:
- Positive
- Negative
- Neutral
- Mixed
2. Topic Identification: Identify and list the specific and meaningful topics mentioned in each patient feedback comment. The topics should reflect the patient's complaints and can have only a negative connotation.
Please provide the results in JSON format with the following keys:
- Comment
- Sentiment
- Topics
Here are the comments to analyze:
{input}"""

FRENCH_PROMPT = """Vous êtes un expert en santé chargé d'analyser des données textuelles relatives au domaine médical et à l'impact du COVID-19. Les données textuelles sont des articles d'actualité. Votre tâche consiste à :
1. Analyse des sentiments: Attribuer un sentiment pertinent à chaque texte dans la liste des données textuelles fournies. Le sentiment peut être :
- Positif
- Négatif
- Neutre
- Mitigé
2. Identification des sujets: Examiner et identifier les thèmes ou sujets spécifiques mentionnés dans chaque texte, tels que la violence sur les réseaux sociaux, la désinformation médicale, les menaces envers les professionnels de la santé, l'éthique médicale, l'impact sur l'économie, et les faits liés au sport.
Veuillez structurer les résultats au format JSON avec les clés suivantes :
- ID
- Sentiment
- Sujets
Chaque texte peut se voir attribuer un ou plusieurs thèmes/sujets. Les thèmes/sujets peuvent consister sur un mot ou des phrases très courtes.
Les thèmes/sujets doivent refléter des labels qui pourront par la suite être utilisés pour classifier ces données textes et ne doivent pas être des mots clés aléatoires.
Voici les textes à analyser :
{input}"""

PROMPT_TEMPLATES = {"en": ENGLISH_PROMPT, "fr": FRENCH_PROMPT}


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    model: str = "gpt-4o"
    temperature: float = 0.0
    max_tokens: int = 4096

    def __post_init__(self):
        if not self.prompt:
            raise ConfigError("empty prompt")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")


@dataclass(frozen=True)
class EmbeddingBundle:
    sentence_vector: np.ndarray
    token_matrix: np.ndarray
    tokens: tuple


@dataclass(frozen=True)
class WordVector:
    word: str
    vector: np.ndarray


def render_prompt(batch, template):
    """Substitute a quoted, newline-separated document list into the template."""
    if "{input}" not in template:
        raise ConfigError("prompt template is missing the {input} slot")
    if not batch:
        raise ConfigError("empty document batch")
    lines = "\n".join(f'{doc.id}: "{doc.text}"' for doc in batch)
    return template.replace("{input}", lines)


def request_key(request: LlmRequest) -> str:
    payload = f"{request.model}\x00{request.temperature!r}\x00{request.prompt}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _atomic_write(path, data: bytes):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class DiskCache:
    """Content-addressed response cache; write-to-temp-then-rename."""

    def __init__(self, directory):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def get(self, key):
        path = os.path.join(self.directory, f"{key}.json")
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)["response"]

    def put(self, key, response):
        envelope = {"request_hash": key, "response": response, "timestamp": time.time()}
        data = json.dumps(envelope).encode("utf-8")
        _atomic_write(os.path.join(self.directory, f"{key}.json"), data)


class HttpChatBackend:
    """Chat-completions style HTTP client with retry/backoff and disk cache."""

    def __init__(self, endpoint, cache_dir, api_key=None, retries=2, timeout=60.0,
                 backoff=1.0):
        self.endpoint = endpoint
        self.cache = DiskCache(cache_dir)
        self.api_key = api_key or os.environ.get("TOPICREFINE_API_KEY")
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff

    def chat_complete(self, request: LlmRequest) -> str:
        key = request_key(request)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        body = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        import requests

        last_exc = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(self.endpoint, json=body, headers=headers,
                                     timeout=self.timeout)
                resp.raise_for_status()
                content = resp.json()["choices"][0]["message"]["content"]
                self.cache.put(key, content)
                return content
            except requests.Timeout as exc:
                last_exc = TimeoutError_(f"chat request timed out: {exc}")
            except Exception as exc:  # noqa: BLE001 - wrapped below
                last_exc = TransportError(f"chat request failed: {exc}")
            if attempt < self.retries:
                time.sleep(self.backoff * (2 ** attempt))
        raise last_exc


class FixtureChatBackend:
    """Replays recorded responses keyed by the request hash."""

    def __init__(self, directory):
        self.directory = directory

    def chat_complete(self, request: LlmRequest) -> str:
        path = os.path.join(self.directory, f"{request_key(request)}.json")
        if not os.path.exists(path):
            raise MissingEmbeddingError(request.prompt[:120])
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)["response"]

    @staticmethod
    def record(directory, request: LlmRequest, response: str):
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, f"{request_key(request)}.json")
        _atomic_write(path, json.dumps({"response": response}).encode("utf-8"))


def _check_bundle(bundle: EmbeddingBundle, d_s, d_b, text):
    if bundle.sentence_vector.shape != (d_s,):
        raise SchemaError(f"sentence vector for {text!r} has dim "
                          f"{bundle.sentence_vector.shape}, expected ({d_s},)")
    if bundle.token_matrix.ndim != 2 or bundle.token_matrix.shape[1] != d_b:
        raise SchemaError(f"token matrix for {text!r} has shape "
                          f"{bundle.token_matrix.shape}, expected (T,{d_b})")
    if bundle.token_matrix.shape[0] < 1:
        raise SchemaError(f"empty token matrix for {text!r}")
    if not (np.isfinite(bundle.sentence_vector).all()
            and np.isfinite(bundle.token_matrix).all()):
        raise SchemaError(f"non-finite embedding for {text!r}")
    return bundle


class HttpEmbeddingBackend:
    """Embedding service client: sentence+token bundles and word vectors."""

    def __init__(self, endpoint, d_s=768, d_b=768, timeout=60.0, retries=2,
                 backoff=1.0):
        self.endpoint = endpoint
        self.d_s = d_s
        self.d_b = d_b
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def _post(self, payload):
        import requests

        last_exc = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(self.endpoint, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()
            except requests.Timeout as exc:
                last_exc = TimeoutError_(f"embedding request timed out: {exc}")
            except Exception as exc:  # noqa: BLE001
                last_exc = TransportError(f"embedding request failed: {exc}")
            if attempt < self.retries:
                time.sleep(self.backoff * (2 ** attempt))
        raise last_exc

    def embed_text(self, text: str) -> EmbeddingBundle:
        out = self._post({"texts": [text], "granularity": "sentence+tokens"})[0]
        bundle = EmbeddingBundle(
            sentence_vector=np.asarray(out["sentence"], dtype=np.float64),
            token_matrix=np.asarray(out["token_vectors"], dtype=np.float64),
            tokens=tuple(out["tokens"]),
        )
        return _check_bundle(bundle, self.d_s, self.d_b, text)

    def embed_word(self, word: str) -> WordVector:
        out = self._post({"texts": [word], "granularity": "word"})[0]
        vec = np.asarray(out["vector"], dtype=np.float64)
        if vec.shape != (self.d_b,) or not np.isfinite(vec).all():
            raise SchemaError(f"bad word vector for {word!r}")
        return WordVector(word=word, vector=vec)


class FixtureEmbeddingBackend:
    """Reads embeddings from a directory of JSON files keyed by SHA-256(text).

    Layout: <dir>/text/<sha256>.json for sentence+token bundles and
    <dir>/word/<sha256>.json for word vectors.
    """

    def __init__(self, directory, d_s, d_b):
        self.directory = directory
        self.d_s = d_s
        self.d_b = d_b

    def embed_text(self, text: str) -> EmbeddingBundle:
        path = os.path.join(self.directory, "text", f"{text_key(text)}.json")
        if not os.path.exists(path):
            raise MissingEmbeddingError(text)
        with open(path, encoding="utf-8") as fh:
            out = json.load(fh)
        bundle = EmbeddingBundle(
            sentence_vector=np.asarray(out["sentence"], dtype=np.float64),
            token_matrix=np.asarray(out["token_vectors"], dtype=np.float64),
            tokens=tuple(out["tokens"]),
        )
        return _check_bundle(bundle, self.d_s, self.d_b, text)

    def embed_word(self, word: str) -> WordVector:
        path = os.path.join(self.directory, "word", f"{text_key(word)}.json")
        if not os.path.exists(path):
            raise MissingEmbeddingError(word)
        with open(path, encoding="utf-8") as fh:
            out = json.load(fh)
        vec = np.asarray(out["vector"], dtype=np.float64)
        if vec.shape != (self.d_b,) or not np.isfinite(vec).all():
            raise SchemaError(f"bad word vector for {word!r}")
        return WordVector(word=word, vector=vec)

    @staticmethod
    def record_text(directory, text, sentence, tokens, token_vectors):
        d = os.path.join(directory, "text")
        os.makedirs(d, exist_ok=True)
        payload = {
            "sentence": [float(x) for x in sentence],
            "tokens": list(tokens),
            "token_vectors": [[float(x) for x in row] for row in token_vectors],
        }
        _atomic_write(os.path.join(d, f"{text_key(text)}.json"),
                      json.dumps(payload).encode("utf-8"))

    @staticmethod
    def record_word(directory, word, vector):
        d = os.path.join(directory, "word")
        os.makedirs(d, exist_ok=True)
        payload = {"vector": [float(x) for x in vector]}
        _atomic_write(os.path.join(d, f"{text_key(word)}.json"),
                      json.dumps(payload).encode("utf-8"))
