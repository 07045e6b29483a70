"""
VLD Navigation - Remote Perception Backend

Chat-completion client for live language and vision-language models. Each
role sends a versioned text prompt (plus the view encoded as a binary PGM for
the vision roles) and parses a strict one-line answer grammar:

    ANSWER: <int>                          floor count
    ANSWER: <int> OBJECT: <color> <label>  request understanding
    BOX: x0 x1 y0 y1 | NONE                recognition, building box
    POINT: <1-5>                           direction choice

Replies that violate the grammar are re-asked a configured number of times;
after that the vision roles fall back to refusal or not-found.
"""

import re
import base64
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np
import requests

from vldnav.perception.base import PerceptionBackend
from vldnav.perception.memory import ExplorationMemory
from vldnav.perception.noise import NoiseStream
from vldnav.perception.types import (
    ChoiceAnswer, FloorCountAnswer, MarkedView, RecognitionAnswer,
    RequestInterpretation, ViewObservation
)
from vldnav.utils.common import ENV_REMOTE_TOKEN, ENV_REMOTE_URL
from vldnav.utils.error_handling import (
    ConfigurationError, GrammarError, NoBuildingInViewError, TransportError
)
from vldnav.world.camera import render_depth
from vldnav.world.generator import OBJECT_CATALOG
from vldnav.world.types import (
    CAMERA_INDICES, CameraRig, DepthImage, DronePose, ObjectColor, ObjectTag, PixelBox, WorldModel
)

logger = logging.getLogger('vldnav.perception.remote')

PROMPT_DIR = Path(__file__).parent / 'prompts'
ROLES = ('request', 'floor', 'building', 'recognition', 'choice')

ANSWER_RE = re.compile(r'^ANSWER: (\d+)$')
REQUEST_RE = re.compile(r'^ANSWER: (\d+) OBJECT: ([a-z]+) ([a-z][a-z ]*[a-z])$')
BOX_RE = re.compile(r'^BOX: (\d+) (\d+) (\d+) (\d+)$')
POINT_RE = re.compile(r'^POINT: (\d+)$')
NONE_ANSWER = 'NONE'

LABEL_CATEGORY = {label: category for category, labels in OBJECT_CATALOG.items() for label in labels}


def load_prompt(role: str, version: str = 'v1') -> str:
    """Read a prompt template shipped with the package."""
    if role not in ROLES:
        raise ValueError(f"Unknown role: {role}")
    path = PROMPT_DIR / f"{role}_{version}.txt"
    if not path.exists():
        raise ConfigurationError(f"Prompt asset not found: {path}")
    return path.read_text(encoding='utf-8')


def encode_pgm(depth: DepthImage, marks: Sequence[tuple] = ()) -> bytes:
    """Binary 8-bit PGM of a depth image (near is dark); marked pixels are drawn white."""
    scaled = np.clip(depth.data / depth.max_range, 0.0, 1.0) * 254.0
    pixels = np.round(scaled).astype(np.uint8)
    for col, row in marks:
        r0, r1 = max(0, row - 1), min(depth.height, row + 2)
        c0, c1 = max(0, col - 1), min(depth.width, col + 2)
        pixels[r0:r1, c0:c1] = 255
    header = f"P5\n{depth.width} {depth.height}\n255\n".encode('ascii')
    return header + pixels.tobytes()


def _answer_line(reply: str, pattern: Optional[re.Pattern] = None, allow_none: bool = False) -> Any:
    """The single grammar line of a reply (a regex match, or NONE_ANSWER)."""
    found = []
    for line in (reply or '').splitlines():
        line = line.strip()
        if allow_none and line == NONE_ANSWER:
            found.append(NONE_ANSWER)
        elif pattern is not None:
            match = pattern.match(line)
            if match:
                found.append(match)
    if len(found) != 1:
        raise GrammarError(f"Expected exactly one answer line, found {len(found)} in reply {reply[:80]!r}")
    return found[0]


def parse_floor_reply(reply: str) -> FloorCountAnswer:
    line = _answer_line(reply, ANSWER_RE, allow_none=True)
    if line == NONE_ANSWER:
        return FloorCountAnswer.refusal()
    return FloorCountAnswer(floors_visible=int(line.group(1)))


def parse_request_reply(reply: str) -> RequestInterpretation:
    match = _answer_line(reply, REQUEST_RE)
    floor, color, label = int(match.group(1)), match.group(2), match.group(3)
    if floor < 1:
        raise GrammarError(f"Target floor must be >= 1, got {floor}")
    if color not in {c.value for c in ObjectColor}:
        raise GrammarError(f"Unknown colour '{color}'")
    if label not in LABEL_CATEGORY:
        raise GrammarError(f"Unknown object label '{label}'")
    return RequestInterpretation(floor, ObjectTag(LABEL_CATEGORY[label], color, label))


def parse_box_reply(reply: str, width: int, height: int) -> Optional[PixelBox]:
    line = _answer_line(reply, BOX_RE, allow_none=True)
    if line == NONE_ANSWER:
        return None
    x0, x1, y0, y1 = (int(g) for g in line.groups())
    if not (0 <= x0 < x1 < width and 0 <= y0 < y1 < height):
        raise GrammarError(f"Box {x0} {x1} {y0} {y1} is outside a {width}x{height} image or degenerate")
    return x0, x1, y0, y1


def parse_point_reply(reply: str) -> int:
    point = int(_answer_line(reply, POINT_RE).group(1))
    if point not in CAMERA_INDICES:
        raise GrammarError(f"Point {point} is outside 1..5")
    return point


class RemoteClient:
    """Blocking chat-completion client with bounded transport and grammar retries."""

    def __init__(self, url: str, token: Optional[str] = None, model: str = 'qwen2-vl-7b-instruct',
                 timeout: float = 30.0, retries: int = 2, transport_retries: int = 1,
                 session: Optional[requests.Session] = None):
        if not url:
            raise ConfigurationError(f"Remote backend needs an endpoint URL (set {ENV_REMOTE_URL} or --url)")
        self.url = url
        self.model = model
        self.timeout = timeout
        self.retries = retries
        self.transport_retries = transport_retries
        self.session = session or requests.Session()
        self.headers = {'Content-Type': 'application/json'}
        if token:
            self.headers['Authorization'] = f"Bearer {token}"
        self.request_count = 0

    def build_body(self, prompt: str, image: Optional[bytes] = None) -> Dict[str, Any]:
        content = [{'type': 'text', 'text': prompt}]
        if image is not None:
            content.append({
                'type': 'image',
                'mime_type': 'image/x-portable-graymap',
                'data': base64.b64encode(image).decode('ascii'),
            })
        return {'model': self.model, 'temperature': 0, 'messages': [{'role': 'user', 'content': content}]}

    def complete(self, prompt: str, image: Optional[bytes] = None) -> str:
        """Send one request and return the reply text."""
        body = self.build_body(prompt, image)
        last_error = None
        for attempt in range(self.transport_retries + 1):
            self.request_count += 1
            try:
                response = self.session.post(self.url, json=body, headers=self.headers, timeout=self.timeout)
                if response.status_code >= 400:
                    raise TransportError(f"Endpoint returned HTTP {response.status_code}")
                message = response.json()['choices'][0]['message']['content']
            except TransportError as e:
                last_error = e
            except (requests.RequestException, ValueError, KeyError, IndexError, TypeError) as e:
                last_error = TransportError(f"Remote request failed: {e}")
            else:
                if isinstance(message, list):
                    message = '\n'.join(part.get('text', '') for part in message if isinstance(part, dict))
                return message or ''
            logger.warning(f"Transport attempt {attempt + 1} failed: {last_error}")
        raise last_error

    def query(self, role: str, prompt: str, parser: Callable[[str], Any], image: Optional[bytes] = None) -> Any:
        """Ask until the reply parses; GrammarError after retries + 1 attempts."""
        for attempt in range(self.retries + 1):
            reply = self.complete(prompt, image)
            try:
                return parser(reply)
            except GrammarError as e:
                logger.warning(f"Grammar violation for role '{role}' (attempt {attempt + 1}): {e}")
        raise GrammarError(f"No valid '{role}' answer after {self.retries + 1} attempts")

    def close(self):
        self.session.close()


class RemoteBackend(PerceptionBackend):
    """Model roles answered by a remote chat-completion endpoint."""

    name = 'remote'

    def __init__(self, client: RemoteClient, rig: CameraRig, prompt_version: str = 'v1'):
        self.client = client
        self.rig = rig
        self.prompts = {role: load_prompt(role, prompt_version) for role in ROLES}

    @classmethod
    def from_config(cls, config: Dict, rig: Optional[CameraRig] = None,
                    session: Optional[requests.Session] = None) -> 'RemoteBackend':
        remote = config['remote']
        client = RemoteClient(
            url=remote.get('url'),
            token=remote.get('token'),
            model=remote['model'],
            timeout=remote['timeout'],
            retries=remote['retries'],
            transport_retries=remote['transport_retries'],
            session=session,
        )
        if not remote.get('token'):
            logger.info(f"No bearer token configured ({ENV_REMOTE_TOKEN}); sending unauthenticated requests")
        return cls(client, rig or CameraRig.from_config(config), remote['prompt_version'])

    def parse_request(self, request_text: str, truth: RequestInterpretation,
                      noise: NoiseStream) -> RequestInterpretation:
        prompt = self.prompts['request'].format(
            request=request_text,
            colors=', '.join(c.value for c in ObjectColor),
            labels=', '.join(sorted(LABEL_CATEGORY)),
        )
        return self.client.query('request', prompt, parse_request_reply)

    def count_floors(self, world: WorldModel, pose: DronePose, cam: int,
                     noise: NoiseStream) -> FloorCountAnswer:
        image = encode_pgm(render_depth(world, pose, cam, self.rig))
        try:
            return self.client.query('floor', self.prompts['floor'], parse_floor_reply, image)
        except GrammarError:
            return FloorCountAnswer.refusal()

    def locate_building(self, world: WorldModel, pose: DronePose, cam: int,
                        noise: NoiseStream) -> PixelBox:
        image = encode_pgm(render_depth(world, pose, cam, self.rig))
        prompt = self.prompts['building'].format(width=self.rig.width, height=self.rig.height)
        try:
            box = self.client.query('building', prompt,
                                    lambda r: parse_box_reply(r, self.rig.width, self.rig.height), image)
        except GrammarError:
            box = None
        if box is None:
            raise NoBuildingInViewError(f"Remote model found no building in view of camera {cam}")
        return box

    def recognize_target(self, views: Dict[int, ViewObservation], target: RequestInterpretation,
                         noise: NoiseStream) -> RecognitionAnswer:
        for cam in CAMERA_INDICES:
            observation = views.get(cam)
            if observation is None:
                continue
            scene = '\n'.join(
                f"- {', '.join(t.describe() for t in f.decorations) or 'plain window'} at "
                f"{' '.join(str(v) for v in f.pixel_box)}"
                for f in observation.features
            ) or '- nothing recognisable'
            prompt = self.prompts['recognition'].format(
                target=target.target_object.describe(), scene=scene,
                width=observation.depth.width, height=observation.depth.height,
            )
            width, height = observation.depth.width, observation.depth.height
            try:
                box = self.client.query('recognition', prompt,
                                        lambda r: parse_box_reply(r, width, height),
                                        encode_pgm(observation.depth))
            except GrammarError:
                box = None
            if box is not None:
                return RecognitionAnswer(True, box, cam, _attribute(box, observation))
        return RecognitionAnswer.not_found()

    def choose_direction(self, view: MarkedView, distances: Sequence[float],
                         memory: ExplorationMemory, noise: NoiseStream) -> ChoiceAnswer:
        lines = '\n'.join(f"- point {k}: {d:.1f} m" for k, d in enumerate(distances, start=1))
        prompt = self.prompts['choice'].format(distances=lines)
        image = encode_pgm(view.depth, [(c, view.row) for c in view.columns])
        try:
            return ChoiceAnswer(point_index=self.client.query('choice', prompt, parse_point_reply, image))
        except GrammarError:
            return ChoiceAnswer.refusal()

    def shutdown(self) -> None:
        self.client.close()


def _attribute(box: PixelBox, observation: ViewObservation) -> Optional[str]:
    """Window whose projected box overlaps the returned box the most."""
    best, best_area = None, 0
    for feature in observation.features:
        fx0, fx1, fy0, fy1 = feature.pixel_box
        w = min(box[1], fx1) - max(box[0], fx0) + 1
        h = min(box[3], fy1) - max(box[2], fy0) + 1
        if w > 0 and h > 0 and w * h > best_area:
            best, best_area = feature.window_id, w * h
    return best
