"""サンプルデプロイ作成スクリプト

data/ の入院記録サンプルから索引とバケットを作り、deploy/ に書き出す。
実行: python seed_data.py [出力先]
"""

import sys
import os

# プロジェクトルートをパスに追加
sys.path.insert(0, os.path.dirname(__file__))

from config.settings import settings
from src.index.iaq import ccs_to_dense
from src.protocol.deployment import build_from_config, write_deployment

SAMPLE_CONFIG = os.path.join(os.path.dirname(__file__), "data", "sample_deployment.json")


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else settings.deploy_dir

    print("=" * 60)
    print("  集約クエリ PIR - サンプルデプロイ作成")
    print("=" * 60)

    deployment = build_from_config(SAMPLE_CONFIG)
    catalog = deployment.catalog
    print(f"\nレコード数 r={deployment.db.r}, ワード数 s={catalog.s}")
    print(f"サーバ座標: {catalog.coordinates}")

    for keyword, indexes in deployment.indexes.items():
        print(f"\n[{keyword}] u={len(indexes)}")
        for iaq in indexes:
            print(f"  {iaq.label}  (p={iaq.p}, nnz={iaq.nnz})")
            for label, row in zip(iaq.row_labels, ccs_to_dense(iaq.storage)):
                print(f"    {label:>8}: {' '.join(map(str, row))}")

    for name, seconds in deployment.timings.items():
        print(f"  {name}: {seconds:.6f} s")

    path = write_deployment(deployment, out_dir)
    print(f"\n書き出し完了: {path}")
    print('試す: python -m src.cli query "SUM(days) WHERE patient=3" --local 4 -t 1')


if __name__ == "__main__":
    main()
